//! Set-to-set detection metrics: compare a perturbed prediction against
//! planted ground truth.
//!
//! Run: `cargo run --example evaluate_detection`

use scansum::corpus::{load_embeddings, load_manifest};
use scansum::detect_eval::evaluate_detection;
use scansum::keyframe::KeyframeSet;
use scansum::similarity::similarity_matrix;
use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let dir = std::env::temp_dir().join("scansum-example-eval");
    let gt = synth::generate(&SynthSpec::demo(11), &dir)?;
    let manifest = load_manifest(&dir.join("manifest.json"))?;
    let s = similarity_matrix(&load_embeddings(&manifest, "similarity")?)?;

    let gt_set = KeyframeSet::from_indices(gt.keyframe_indices.clone())?;

    // perturb: shift two keyframes by a few frames, drop the last one
    let mut pred = gt.keyframe_indices.clone();
    pred[0] += 3;
    pred[1] += 5;
    pred.pop();
    let pred_set = KeyframeSet::from_indices(pred)?;

    let report = evaluate_detection(&pred_set, &gt_set, &s, manifest.fps, 0.96)?;
    println!("prediction vs ground truth ({} vs {} frames)", pred_set.len(), gt_set.len());
    println!("  cosine simi:       {:.2} %", report.cosine_simi_pct);
    println!("  absolute time err: {:.3} s", report.absolute_time_err_s);
    println!(
        "  correct time err:  {:.3} s (all matched: {})",
        report.correct_time_err_s, report.all_matched
    );
    println!("  keyframe num err:  {}", report.keyframe_num_err);
    println!("per ground-truth frame:");
    for m in &report.per_gt_matches {
        println!(
            "  gt {:3} -> sim match {:3} ({:.4}), time match {:3} ({:.2} s)",
            m.gt_index, m.sim_pred_index, m.similarity, m.time_pred_index, m.time_err_s
        );
    }
    Ok(())
}
