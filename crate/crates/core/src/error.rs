use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the model, likelihood and sampling layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time gap must be positive, got {0}")]
    NonPositiveGap(f64),

    #[error("timestamps must be strictly increasing (index {index}: {prev} -> {next})")]
    NonMonotoneTime { index: usize, prev: f64, next: f64 },

    #[error("duplicate timestamp {time} at index {index}")]
    DuplicateTimestamp { index: usize, time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{which} is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { which: &'static str, pivot: usize },

    #[error("numerical breakdown at step {step}: {reason}")]
    NumericalBreakdown { step: usize, reason: String },

    #[error("dense oracle limited to {limit} observations, got {n}")]
    SizeGuard { n: usize, limit: usize },

    #[error("target density is not finite at the starting point")]
    InvalidStart,

    #[error("need at least {needed} samples after burn-in, have {have}")]
    TooFewSamples { needed: usize, have: usize },

    #[error("chain has zero variance")]
    ZeroVariance,

    #[error("mixture has no components")]
    EmptyMixture,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures while reading or writing the CSV and key-value formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("non-monotone time at row {row}")]
    NonMonotoneTime { row: usize },

    #[error("duplicate timestamp at row {row}")]
    DuplicateTimestamp { row: usize },

    #[error("unrecognised header {0:?}; expected `t,y` or `t,x,y,vx,vy`")]
    Header(String),

    #[error(transparent)]
    Model(#[from] Error),
}
