//! scansum: keyframe detection, evaluation metrics, and biometry
//! measurement for ultrasound exam recordings.
//!
//! The library covers the whole pipeline on plain data files — per-frame
//! embeddings in, a multimodal summary report out:
//!
//! 1. frame-frame cosine similarity and keyframe label propagation
//! 2. diversity-constrained greedy keyframe selection
//! 3. set-to-set detection metrics and caption metrics (BLEU, ROUGE-L)
//! 4. mask geometry: ellipse fits (HC/AC/BPD), minimum enclosing
//!    rectangles (FL/Cereb), caliper scaling, GA/EFW conversion
//! 5. a seeded synthetic exam generator that plants ground truth for
//!    every stage
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability, and the `scansum` binary for the same operations as CLI
//! subcommands.

pub mod biometry;
pub mod canonical;
pub mod caption_eval;
pub mod corpus;
pub mod detect_eval;
pub mod error;
pub mod keyframe;
pub mod pipeline;
pub mod similarity;
pub mod stats;
pub mod summary;
pub mod synth;

pub use biometry::{BiometrySet, EllipseParams, EquationTable, RectParams};
pub use corpus::{
    BinaryMask, BiometryClass, CaptionRecord, EmbeddingMatrix, ExamManifest, KeyframeLabels,
};
pub use detect_eval::DetectionReport;
pub use error::{Error, Result};
pub use keyframe::{DetectionConfig, KeyframeSet, ScoreVector};
pub use similarity::SimilarityMatrix;
pub use summary::SummaryReport;
pub use synth::{GroundTruth, SynthSpec};
