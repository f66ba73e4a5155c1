//! Generate a synthetic exam corpus with planted ground truth.
//!
//! Run: `cargo run --example synth_exam`

use scansum::synth::{self, SynthSpec};

fn main() -> scansum::Result<()> {
    let out = std::env::temp_dir().join("scansum-example-synth");
    let spec = SynthSpec::demo(42);
    let gt = synth::generate(&spec, &out)?;

    println!("corpus written to {}", out.display());
    println!("exam id:    {}", gt.exam_id);
    println!("frames:     {} at {} fps", spec.frames, spec.fps);
    println!("keyframes:  {:?}", gt.keyframe_indices);
    println!("clusters:   {:?}", gt.keyframe_clusters);
    println!("scale:      {} mm/px", gt.mm_per_px);
    for shape in &gt.shapes {
        println!(
            "  planted {} at frame {} -> expected {:.2} mm ({})",
            shape.class.as_str(),
            shape.frame_index,
            shape.expected_mm,
            shape.mask_path.display()
        );
    }
    for caption in gt.captions.iter().take(3) {
        println!("  caption @{}: {}", caption.frame_index, caption.text);
    }
    Ok(())
}
