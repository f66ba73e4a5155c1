//! The whole pipeline in one pass: synthesize an exam, detect keyframes,
//! attach captions, measure the biometry masks, and emit the summary
//! report as JSON and Markdown.
//!
//! Run: `cargo run --example full_pipeline`

use std::collections::BTreeMap;

use scansum::biometry::{measure, BiometrySet, EquationTable};
use scansum::caption_eval::CaptionProvider;
use scansum::corpus::{load_manifest, load_mask, CaptionRecord};
use scansum::pipeline::{detect, DetectInputs};
use scansum::summary::{assemble, emit, ReportFormat};
use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let dir = std::env::temp_dir().join("scansum-example-pipeline");
    synth::generate(&SynthSpec::demo(2024), &dir)?;
    let manifest_path = dir.join("manifest.json");
    let manifest = load_manifest(&manifest_path)?;

    // stage 1: diverse keyframe detection
    let keyframes = detect(&manifest_path, &DetectInputs::default())?;
    println!("stage 1: {} keyframes detected", keyframes.len());

    // stage 2: captions from the lookup provider
    let provider =
        CaptionProvider::from_cli_spec(&format!("lookup:{}", dir.join("captions.jsonl").display()))?;
    let mut captions: Vec<CaptionRecord> = Vec::new();
    for &frame in keyframes.indices() {
        if let Some(record) = provider.record(frame) {
            captions.push(record.clone());
        }
    }
    println!("stage 2: {} keyframes captioned", captions.len());

    // stage 3: measure masks attached to biometry keyframes
    let scale = manifest.mm_per_px.expect("demo manifest carries a scale");
    let mut measurements: BTreeMap<usize, BiometrySet> = BTreeMap::new();
    for mask_ref in manifest.masks.as_deref().unwrap_or_default() {
        if !keyframes.indices().contains(&mask_ref.frame_index) {
            continue;
        }
        let mask = load_mask(&manifest.resolve(&mask_ref.path), scale)?;
        measurements
            .entry(mask_ref.frame_index)
            .or_default()
            .merge(&measure(&mask, mask_ref.class)?);
    }
    println!("stage 3: {} keyframes measured", measurements.len());

    let report = assemble(
        &manifest,
        &keyframes,
        &captions,
        &measurements,
        &EquationTable::default(),
    )?;
    let json_path = dir.join("report.json");
    let md_path = dir.join("report.md");
    std::fs::write(&json_path, emit(&report, ReportFormat::Json)?).unwrap();
    std::fs::write(&md_path, emit(&report, ReportFormat::Markdown)?).unwrap();

    println!();
    println!("{}", emit(&report, ReportFormat::Markdown)?);
    println!("written: {} and {}", json_path.display(), md_path.display());
    Ok(())
}
