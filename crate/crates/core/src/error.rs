use alloc::string::String;

/// Errors raised by model, analytic and dynamics operations.
///
/// Rank deficiency of the teacher mask is a typed outcome, not a bug: it
/// happens with probability `A_d` on every fresh design.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("n_samples ({n_samples}) must exceed n_features ({n_features}) and n_features must be at least 1")]
    InvalidShape { n_samples: usize, n_features: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} must be a nonzero vector")]
    ZeroVector(&'static str),
    #[error("teacher mask has {active} active rows, need more than {n_features} for a positive definite gram")]
    RankDeficient { active: usize, n_features: usize },
    #[error("linear system is singular")]
    Singular,
    #[error("teacher pre-activation at row {row} is zero")]
    ZeroMargin { row: usize },
    #[error("sign pattern of the optimum changed at Newton iteration {iteration}")]
    SignPatternChanged { iteration: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("shifted matrix is not positive definite")]
    NotPositiveDefinite,
}

pub type Result<T> = core::result::Result<T, Error>;
