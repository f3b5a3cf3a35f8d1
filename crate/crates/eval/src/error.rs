use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown listing {0}")]
    UnknownListing(u64),

    #[error("corrupt file ({check}): {detail}")]
    Corruption { check: &'static str, detail: String },

    #[error(transparent)]
    Core(#[from] visearch_core::Error),

    #[error(transparent)]
    Rank(#[from] visearch_ranker::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn corruption(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Corruption {
            check,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
