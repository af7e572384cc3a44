use alloc::string::String;

/// Failure modes shared by every construction and certification routine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("state is not faithful (Gram rank {rank} < {dim})")]
    NotFaithful { rank: usize, dim: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("element lies outside {what} (projection residual {residual:.3e})")]
    Membership { what: String, residual: f64 },

    #[error("operator not well defined on {what} (residual {residual:.3e})")]
    NotWellDefined { what: String, residual: f64 },

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn pre_err(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
