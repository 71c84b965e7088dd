use thiserror::Error;

/// Errors raised by the simulator, the model and the search routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QetError {
    #[error("size error: {0}")]
    Size(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("validity error: {0}")]
    Validity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("bracketing error: {0}")]
    Bracketing(String),
}

pub type Result<T> = std::result::Result<T, QetError>;
