use thiserror::Error;

/// Errors raised by the optimizer library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("objective returned NaN")]
    NanObjective,

    #[error("probability parameter {value} at index {index} is outside (0, 1)")]
    InvalidProbability { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown benchmark function `{name}` (valid: {valid})")]
    UnknownFunction { name: String, valid: String },

    #[error("unknown variant `{name}` (valid: {valid})")]
    UnknownVariant { name: String, valid: String },

    #[error("degenerate quantile interval: q_le = {q_le}, q_lt = {q_lt}")]
    DegenerateQuantiles { q_le: f64, q_lt: f64 },

    #[error("proposal density is zero at a sample")]
    ZeroProposalDensity,

    #[error("archive is empty")]
    EmptyArchive,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
