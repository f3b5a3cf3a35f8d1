//! Query-path data types shared across scan, fan-out and re-ranking.

use std::collections::BTreeMap;

use visearch_cluster::NodeId;
use visearch_core::score::Aspect;
use visearch_core::{BinarySignature, CategoryId, ListingId};

/// One candidate from a partition scan, ordered by (hamming, listing id).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hit {
    pub hamming: u16,
    pub listing_id: ListingId,
}

/// A search request as the serving node sees it. `per_category` is the
/// per-category fetch size (the wire protocol's `N` field); the final
/// result length is chosen by the caller when merging.
#[derive(Clone, Debug)]
pub struct QueryRequest {
    pub request_id: u64,
    pub signature: BinarySignature,
    /// Requested (category, confidence) pairs; confidences stay local to
    /// the serving node and do not travel on the wire.
    pub categories: Vec<(CategoryId, f64)>,
    pub per_category: u32,
    /// Predicted query aspects for re-ranking, serving-node local.
    pub predicted_aspects: Vec<(Aspect, f64)>,
    pub rerank: bool,
}

impl QueryRequest {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.per_category == 0 {
            return Err(crate::error::Error::invalid("per-category N must be >= 1"));
        }
        if self.per_category > 10_000 {
            return Err(crate::error::Error::invalid("per-category N capped at 10000"));
        }
        if self.categories.is_empty() {
            return Err(crate::error::Error::invalid(
                "request must name at least one category",
            ));
        }
        Ok(())
    }

    pub fn category_ids(&self) -> Vec<CategoryId> {
        self.categories.iter().map(|(c, _)| *c).collect()
    }
}

/// One node's answer: per-category top-N lists sorted by
/// (hamming, listing id), plus partition accounting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialResult {
    pub per_category: BTreeMap<CategoryId, Vec<Hit>>,
    pub partitions_scanned: u32,
    /// Partitions this node should hold for the request but could not
    /// scan (not yet loaded during redistribution).
    pub partitions_missing: u32,
    pub degraded: bool,
}

/// Final ranked entry. `s_final` equals the blended score after
/// re-ranking and the appearance score otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedResult {
    pub listing_id: ListingId,
    pub category_id: CategoryId,
    pub hamming: u16,
    pub s_appearance: f32,
    pub s_aspect: f32,
    pub s_final: f32,
}

/// Merged fan-out answer before/after re-ranking.
#[derive(Clone, Debug, Default)]
pub struct SearchResponse {
    pub results: Vec<RankedResult>,
    pub per_category: BTreeMap<CategoryId, Vec<Hit>>,
    pub degraded: bool,
    pub nodes_failed: Vec<NodeId>,
    pub partitions_missing: u32,
}
