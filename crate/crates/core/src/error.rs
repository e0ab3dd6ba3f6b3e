use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum ErtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point outside the unit ball: {0}")]
    OutOfDomain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ErtError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ErtError {
    ErtError::InvalidArgument(msg.into())
}
