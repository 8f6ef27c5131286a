//! Error type shared across the crate.

use thiserror::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, SimCheckError>;

/// Errors produced by the checks, the estimators and the I/O layer.
#[derive(Debug, Error)]
pub enum SimCheckError {
    /// An input slice or matrix contained NaN or infinity.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A direction vector with zero (or numerically zero) norm.
    #[error("direction vector has zero norm")]
    ZeroDirection,

    /// The first index coefficient is exactly zero, so the sign convention
    /// `beta[0] > 0` cannot orient the direction.
    #[error("first index coefficient is zero; direction cannot be oriented")]
    Unidentified,

    /// Mismatched dimensions between related arguments.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A bandwidth that is not strictly positive and finite.
    #[error("bandwidth must be positive and finite, got {value}")]
    InvalidBandwidth { value: f64 },

    /// The studentizing variance estimate vanished, so the statistic is not
    /// defined. Carries the (necessarily zero) numerator for diagnostics.
    #[error("degenerate statistic: variance estimate is zero (numerator {i_n})")]
    DegenerateStatistic { i_n: f64 },

    /// A covariate column is constant, so it cannot be scale-standardized.
    #[error("covariate column {column} has zero variance")]
    ConstantCovariate { column: String },

    /// The index estimator failed on every start.
    #[error("index estimation failed: {reason}")]
    EstimationFailed { reason: String },

    /// A configuration value outside its documented range.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// Too few observations for the requested operation.
    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    /// Malformed input data (CSV structure, header, or cell contents).
    #[error("data format error: {reason}")]
    DataFormat { reason: String },

    /// Underlying I/O failure while reading data or writing reports.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SimCheckError {
    /// Process exit code the command-line front end maps this error to:
    /// `2` for a degenerate statistic, `1` for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            SimCheckError::DegenerateStatistic { .. } => 2,
            _ => 1,
        }
    }
}
