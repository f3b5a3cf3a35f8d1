//! Core building blocks of the visual search stack: binary semantic
//! signatures and their scoring algebra, the hash-extraction surrogate
//! model, the bit-exact index file format, and the ingestion pipeline
//! with its versioned hash store.

pub mod error;
pub mod featurize;
pub mod hash;
pub mod index;
pub mod ingest;
pub mod score;
pub mod sig;
pub mod stream;

pub use error::{Error, Result};
pub use hash::{CategoryModel, CategoryPrediction, FeatureVector, HashProjector, PredictMode};
pub use index::{CategoryId, CategoryPartition, ListingId};
pub use score::{Aspect, AspectSet, AspectWeights, ScoringConfig};
pub use sig::{BinarySignature, DEFAULT_SIGNATURE_BITS};
