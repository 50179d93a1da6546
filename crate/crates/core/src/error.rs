use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the crate.
///
/// Indices carried in variants are zero-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("matrix is not symmetric at ({row}, {col}): |a_ij - a_ji| = {diff:.3e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },

    #[error("diagonal entry {index} is {value}, expected 1")]
    NonUnitDiagonal { index: usize, value: f64 },

    #[error("off-diagonal entry ({row}, {col}) = {value} is outside (-1, 1)")]
    CorrelationOutOfRange { row: usize, col: usize, value: f64 },

    #[error("series convergence not guaranteed: spectral norm of Q - I is {norm:.6}")]
    ConvergenceRisk { norm: f64 },

    #[error("path matrix invalid at tau = {tau}: {reason}")]
    PathInvalid { tau: f64, reason: String },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
