use thiserror::Error;

/// Errors produced by signature, hashing, index and ingestion operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signature width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: u32, right: u32 },

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A file failed a structural validation check. `check` names the
    /// check that failed so callers can distinguish corruption modes.
    #[error("corrupt file ({check}): {detail}")]
    Corruption { check: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn corruption(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Corruption {
            check,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
