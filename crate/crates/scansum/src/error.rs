//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("referenced file missing: {0}")]
    MissingFile(PathBuf),
    #[error("size mismatch for {path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("unknown embedding channel '{0}'")]
    UnknownChannel(String),
    #[error("non-finite value in channel '{channel}' at row {row}, col {col}")]
    NonFiniteValue {
        channel: String,
        row: usize,
        col: usize,
    },
    #[error("zero-norm embedding row {row} in channel '{channel}'")]
    ZeroNormRow { channel: String, row: usize },
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("unsupported raster format: {0}")]
    UnsupportedFormat(PathBuf),
    #[error("zero-norm input vector")]
    ZeroNormInput,
    #[error("length mismatch: {what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("prototype list is empty")]
    EmptyPrototypes,
    #[error("no keyframes labeled")]
    NoKeyframes,
    #[error("keyframe set is empty")]
    EmptySet,
    #[error("frame index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("caption corpus is empty")]
    EmptyCorpus,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no eigenvector satisfies the ellipse constraint")]
    NoEllipseSolution,
    #[error("caliper strip has fewer than two tick marks")]
    InsufficientTicks,
    #[error("missing measurement: {0}")]
    MissingMeasurement(String),
    #[error("input {value} outside valid domain [{min}, {max}]")]
    OutOfValidRange { value: f64, min: f64, max: f64 },
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("infeasible synthesis spec: {0}")]
    InfeasibleSpec(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("captioner failed: {0}")]
    CaptionerFailed(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl Error {
    /// Process exit code: 1 validation error, 2 i/o error, 3 numeric or
    /// degenerate-input error.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Io { .. } | MissingFile(_) | CaptionerFailed(_) => 2,
            EmptyMask
            | ZeroNormInput
            | DegenerateInput(_)
            | NoEllipseSolution
            | InsufficientTicks
            | OutOfValidRange { .. } => 3,
            _ => 1,
        }
    }
}
