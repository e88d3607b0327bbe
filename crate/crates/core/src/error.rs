//! Crate-wide error type.

use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset must have at least 2 rows, found {found}")]
    TooFewRows { found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("labels contain a single class; both 0 and 1 are required")]
    SingleClass,

    #[error("normal matrix is singular even after ridge fallback")]
    Rank,

    #[error("bootstrap world {world} produced a single-class resample in {attempts} attempts")]
    DegenerateResample { world: usize, attempts: usize },

    #[error(
        "robust system is singular at anchor strength 0; pass a positive lambda \
         so the anchored objective has a unique minimizer"
    )]
    Indeterminate,

    #[error("estimate is not finite ({estimator})")]
    NonFiniteEstimate { estimator: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
