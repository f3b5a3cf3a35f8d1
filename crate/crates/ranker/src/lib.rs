//! The image ranking service: category-restricted Hamming ranking over
//! partitioned, cluster-distributed signature arrays, with scatter-gather
//! fan-out, exact two-level merging and aspect-based re-ranking.

pub mod error;
pub mod merge;
pub mod node;
pub mod query;
pub mod rerank;
pub mod scan;
pub mod server;
pub mod service;
pub mod sim;
pub mod topn;
pub mod wire;

pub use error::{Error, Result};
pub use node::{IndexDirLoader, InMemoryLoader, NodeState, PartitionLoader};
pub use query::{Hit, PartialResult, QueryRequest, RankedResult, SearchResponse};
pub use rerank::{rerank, AspectSource, RERANK_CAP};
pub use scan::{scan_partition, scan_partition_workers};
pub use service::{
    end_to_end_query, NodeTransport, QueryInput, QueryOptions, QueryOutcome, SearchConfig,
    SearchEngine, StageTimings,
};
pub use sim::LocalCluster;
pub use topn::TopSelector;
