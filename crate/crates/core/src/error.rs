use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("rttm line {line}: {msg}")]
    RttmParse { line: usize, msg: String },

    #[error("overlapping segments: #{first} [{first_start:.2}, {first_end:.2}] and #{second} [{second_start:.2}, {second_end:.2}]")]
    Overlap {
        first: usize,
        first_start: f64,
        first_end: f64,
        second: usize,
        second_start: f64,
        second_end: f64,
    },

    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("segment #{index} [{start:.3}, {end:.3}] covers no frames")]
    EmptySegment { index: usize, start: f64, end: f64 },

    #[error("not enough samples: {msg}")]
    NotEnoughSamples { msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample {index} has zero norm")]
    ZeroNorm { index: usize },

    #[error("node {index} has zero degree in the similarity graph")]
    ZeroDegree { index: usize },

    #[error("eigen decomposition failed: {0}")]
    Eigen(String),

    #[error("soft cluster {cluster} has zero total assignment")]
    EmptySoftCluster { cluster: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
