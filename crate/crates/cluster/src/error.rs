use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cluster unavailable: {0}")]
    Unavailable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bad wire message ({check}): {detail}")]
    Protocol { check: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn protocol(check: &'static str, detail: impl Into<String>) -> Self {
        Error::Protocol {
            check,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
