//! Benchmark harness: synthetic class-clustered corpora, the surrogate
//! aspect predictor, a k-means-over-hashes baseline, and the full
//! retrieval measurement protocol (precision@K, accuracy@K, NDCG, bit
//! balance inputs and timing tables).

pub mod aspects;
pub mod dataset;
pub mod error;
pub mod kmeans;
pub mod metrics;
pub mod report;
pub mod timing;

pub use aspects::predict_aspects_oracle;
pub use dataset::{isotropic_features, GenParams, Split, SyntheticDataset};
pub use error::{Error, Result};
pub use kmeans::{KMeansBaseline, KMeansParams};
pub use metrics::{EvalContext, EvalQuery, Evaluator, Method, MethodReport, MetricRow};
pub use report::MetricReport;
pub use timing::{bench_timing, TimingRow};
