//! Keyframe detection end to end: similarity matrix, label propagation,
//! prototype scoring, and diversity-constrained greedy selection.
//!
//! Run: `cargo run --example detect_keyframes`

use scansum::corpus::{load_embeddings, load_labels, load_manifest};
use scansum::keyframe::{
    baseline_score, build_prototypes, compute_class_ratio, diverse_select, propagate_labels,
    DetectionConfig,
};
use scansum::similarity::similarity_matrix;
use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let dir = std::env::temp_dir().join("scansum-example-detect");
    synth::generate(&SynthSpec::demo(7), &dir)?;

    let manifest = load_manifest(&dir.join("manifest.json"))?;
    let embeddings = load_embeddings(&manifest, "similarity")?;
    let labels = load_labels(&manifest)?;
    let s = similarity_matrix(&embeddings)?;

    println!(
        "exam '{}': {} frames, class ratio {:.0}:1",
        manifest.exam_id,
        manifest.frame_count,
        compute_class_ratio(&labels)?
    );

    // label propagation rebalances sparse annotations before training;
    // this corpus plants near-duplicates at cosine ~0.98, so the default
    // 0.99 threshold leaves labels alone while 0.97 sweeps them in
    let cfg = DetectionConfig::default();
    for threshold in [cfg.propagation_threshold, 0.97] {
        let propagated = propagate_labels(&s, &labels, threshold)?;
        println!(
            "labels: {} annotated -> {} after propagation above {threshold} \
             (class ratio {:.1}:1)",
            labels.key_indices().len(),
            propagated.key_indices().len(),
            compute_class_ratio(&propagated)?
        );
    }

    // prototype scorer stands in for a learned model
    let detector = load_embeddings(&manifest, "detector")?;
    let prototypes = build_prototypes(&[(&detector, &labels)], Some(0.99))?;
    let scores = baseline_score(&detector, &prototypes)?;

    let selected = diverse_select(&scores, &s, &cfg)?;
    println!(
        "selected {} keyframes with tau={} tau'={}:",
        selected.len(),
        cfg.tau,
        cfg.tau_prime
    );
    for (index, score) in selected.iter() {
        println!("  frame {index:4}  t={:6.1}s  score {score:.4}", index as f64 / manifest.fps);
    }
    Ok(())
}
