//! Biometry from masks: caliper scaling, ellipse and rectangle fits,
//! and the clinical conversions to gestational age and fetal weight.
//!
//! Run: `cargo run --example measure_biometry`

use scansum::biometry::{
    caliper_scale, estimated_fetal_weight, gestational_age, measure, BiometrySet, EquationTable,
};
use scansum::corpus::{load_gray, load_manifest, load_mask};
use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let dir = std::env::temp_dir().join("scansum-example-measure");
    let gt = synth::generate(&SynthSpec::demo(5), &dir)?;
    let manifest = load_manifest(&dir.join("manifest.json"))?;

    // derive the pixel scale from the caliper strip rather than trusting
    // the manifest value
    let caliper = manifest.caliper_strip.as_ref().expect("demo has a caliper");
    let strip = load_gray(&manifest.resolve(&caliper.path))?;
    let mm_per_px = caliper_scale(&strip, caliper.tick_spacing_mm)?;
    println!(
        "caliper scale: {mm_per_px:.4} mm/px (planted {:.4})",
        gt.mm_per_px
    );

    let mut merged = BiometrySet::default();
    for planted in &gt.shapes {
        let mask = load_mask(&manifest.resolve(&planted.mask_path), mm_per_px)?;
        let measured = measure(&mask, planted.class)?;
        merged.merge(&measured);
        let got = match planted.class.as_str() {
            "HC" => measured.hc_mm,
            "AC" => measured.ac_mm,
            "FL" => measured.fl_mm,
            _ => measured.cereb_mm,
        }
        .unwrap();
        println!(
            "  {:5} frame {:3}: measured {:7.2} mm, planted {:7.2} mm ({:+.2} %)",
            planted.class.as_str(),
            planted.frame_index,
            got,
            planted.expected_mm,
            (got - planted.expected_mm) / planted.expected_mm * 100.0
        );
        if let (Some(bpd), Some(expected)) = (measured.bpd_mm, planted.expected_bpd_mm) {
            println!("        BPD: measured {bpd:.2} mm, planted {expected:.2} mm");
        }
    }

    let table = EquationTable::default();
    println!(
        "gestational age: {:.1} weeks ({})",
        gestational_age(&merged, &table)?,
        table.ga.name
    );
    println!(
        "estimated fetal weight: {:.0} g ({})",
        estimated_fetal_weight(&merged, &table)?,
        table.efw.name
    );
    Ok(())
}
