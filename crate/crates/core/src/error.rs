use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("group kinds do not match")]
    GroupMismatch,

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error(
        "representation is not square integrable at this discretization \
         (relative spread {spread:.3e} exceeds {threshold:.1e})"
    )]
    NotSquareIntegrable { spread: f64, threshold: f64 },

    #[error("cost limit exceeded: {0}")]
    CostLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
