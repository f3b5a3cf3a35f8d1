use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signature width mismatch: query is {query} bytes, partition stores {partition}")]
    WidthMismatch { query: usize, partition: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cluster unavailable: {0}")]
    ClusterUnavailable(String),

    #[error("node {node} unreachable: {detail}")]
    NodeUnreachable { node: String, detail: String },

    #[error("bad wire message ({check}): {detail}")]
    Protocol { check: &'static str, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] visearch_core::Error),

    #[error(transparent)]
    Cluster(#[from] visearch_cluster::Error),

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
