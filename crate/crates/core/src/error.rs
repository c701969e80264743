use thiserror::Error;

/// Errors raised by simulations, searches and parameter validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator failed to converge: {0}")]
    Convergence(String),

    #[error("resource cap exceeded: {0}")]
    Resource(String),

    #[error("numerical consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
