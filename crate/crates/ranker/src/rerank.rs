//! Aspect-based re-ranking of an appearance-ranked list: each item's
//! aspect matching score is blended with its appearance score and the
//! list is re-sorted by the blended score.

use visearch_core::ingest::HashStore;
use visearch_core::score::{aspect_score, blended_score, Aspect, AspectSet, ScoringConfig};
use visearch_core::ListingId;

use crate::error::{Error, Result};
use crate::query::RankedResult;

/// At most this many results are re-ranked per query.
pub const RERANK_CAP: usize = 1000;

/// Ground-truth aspect lookup for result listings.
pub trait AspectSource: Send + Sync {
    fn aspects_for(&self, listing_id: ListingId) -> Option<AspectSet>;
}

impl AspectSource for HashStore {
    fn aspects_for(&self, listing_id: ListingId) -> Option<AspectSet> {
        self.listing_aspects(listing_id).cloned()
    }
}

impl AspectSource for std::collections::BTreeMap<ListingId, AspectSet> {
    fn aspects_for(&self, listing_id: ListingId) -> Option<AspectSet> {
        self.get(&listing_id).cloned()
    }
}

/// Re-ranks `initial` (sorted by descending appearance score, at most
/// [`RERANK_CAP`] items) by the blended score. Listings absent from the
/// aspect lookup score 0 on aspects. Ordering: `s_final` descending,
/// then `s_appearance` descending, then listing id ascending.
pub fn rerank(
    initial: &[RankedResult],
    predicted: &[(Aspect, f64)],
    aspects: &dyn AspectSource,
    cfg: &ScoringConfig,
) -> Result<Vec<RankedResult>> {
    if initial.len() > RERANK_CAP {
        return Err(Error::invalid(format!(
            "re-rank list has {} items, cap is {RERANK_CAP}",
            initial.len()
        )));
    }
    if initial
        .windows(2)
        .any(|w| w[0].s_appearance < w[1].s_appearance)
    {
        return Err(Error::invalid(
            "re-rank input must be sorted by descending appearance score",
        ));
    }
    let mut out = Vec::with_capacity(initial.len());
    for item in initial {
        let s_aspect = aspects
            .aspects_for(item.listing_id)
            .map(|gt| aspect_score(predicted, &gt))
            .unwrap_or(0.0);
        let s_final = blended_score(f64::from(item.s_appearance), s_aspect, cfg)?;
        out.push(RankedResult {
            s_aspect: s_aspect as f32,
            s_final: s_final as f32,
            ..*item
        });
    }
    out.sort_by(|a, b| {
        b.s_final
            .total_cmp(&a.s_final)
            .then(b.s_appearance.total_cmp(&a.s_appearance))
            .then(a.listing_id.cmp(&b.listing_id))
    });
    Ok(out)
}
