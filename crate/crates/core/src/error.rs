use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis mismatch: expected `{expected}`, found `{found}`")]
    BasisMismatch { expected: String, found: String },

    #[error("matrix is not symmetric: max |M - M^T| = {asymmetry:e} (relative to max |M| = {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix (basis `{basis}`)")]
    NoConvergence { dim: usize, basis: String },

    #[error("vector is not normalized: norm^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("zero vector has no participation number")]
    ZeroVector,

    #[error("empty time grid")]
    EmptyGrid,

    #[error("truncation leakage {leakage:e} exceeds threshold {threshold:e}")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("too few samples: {found} (need at least {required})")]
    TooFewSamples { found: usize, required: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: u128, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::Ingest { .. } | Error::Io { .. } => 3,
            Error::DimensionMismatch { .. } | Error::BasisMismatch { .. } => 3,
            _ => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn ingest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingest { path: path.into(), message: message.into() }
    }
}
