use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpinnError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinnError {
    /// Arrays whose shapes disagree with an architecture or with each other.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A precondition on a scalar or list argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Invalid data (non-finite entries, non-binary labels, ...).
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// A loss, gradient or objective became non-finite.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Every restart of a fit (or every cell of a grid) failed.
    #[error("fit failed: {0}")]
    Fit(String),
}

impl SpinnError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        SpinnError::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SpinnError::InvalidArgument(msg.into())
    }
}
