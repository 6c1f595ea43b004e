use thiserror::Error;

/// Errors raised by the curvature and spectral routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method failed or a quantity under/overflowed.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A curvature tensor failed its symmetry checks.
    #[error("invalid curvature tensor: {0}")]
    Validation(String),

    /// Malformed JSON input.
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
