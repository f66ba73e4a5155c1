//! Scan-time experiment: drop growing fractions of the redundant frames,
//! re-run detection on the shortened exams, and tabulate the metrics.
//!
//! Run: `cargo run --example frame_drop_table`

use scansum::pipeline::{drop_table_csv, simulate_drop_table, DropRunConfig};
use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let dir = std::env::temp_dir().join("scansum-example-drop");
    let mut manifests = Vec::new();
    for i in 0..4u64 {
        let out = dir.join(format!("exam{i}"));
        let spec = SynthSpec {
            exam_id: Some(format!("exam-{i}")),
            biometry_shapes: vec![],
            caliper: None,
            ..SynthSpec::demo(100 + i)
        };
        synth::generate(&spec, &out)?;
        manifests.push(out.join("manifest.json"));
    }

    let cfg = DropRunConfig {
        seed: 1,
        ..DropRunConfig::default()
    };
    let (cells, rows) = simulate_drop_table(&manifests, &cfg, 2)?;

    println!(
        "eligible (redundant) fraction per exam: {:?}",
        cells
            .iter()
            .filter(|c| c.drop_fraction == 0.0)
            .map(|c| format!("{}={:.1}%", c.exam_id, c.eligible_fraction * 100.0))
            .collect::<Vec<_>>()
    );
    println!();
    println!("{}", drop_table_csv(&rows));
    for row in &rows {
        println!(
            "drop {:>4.0}% -> scan time saved {:>5.2}%, keyframe num err {:.2} ± {:.2}",
            row.drop_fraction * 100.0,
            row.scan_time_saved_pct_mean,
            row.keyframe_num_err_mean,
            row.keyframe_num_err_std
        );
    }
    Ok(())
}
