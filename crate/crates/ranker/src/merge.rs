//! Two-level result merging: per-category k-way merges of node partials,
//! then the global cross-category merge with listing-level dedup.

use std::collections::BTreeMap;

use visearch_core::CategoryId;

use crate::query::{Hit, RankedResult};

/// Merges sorted hit lists into the top `n`. Inputs come from disjoint
/// record sets (sub-partitions or per-node partitions), so no dedup is
/// needed here.
pub fn merge_hit_lists(lists: impl IntoIterator<Item = Vec<Hit>>, n: usize) -> Vec<Hit> {
    let mut all: Vec<Hit> = lists.into_iter().flatten().collect();
    all.sort_unstable();
    all.truncate(n);
    all
}

/// Global cross-category merge: orders all per-category candidates by
/// (hamming, listing id), keeping one entry per listing. A listing
/// surfacing through several requested categories has identical
/// signatures everywhere, so the duplicate with the lowest category id
/// is kept.
pub fn merge_global(
    per_category: &BTreeMap<CategoryId, Vec<Hit>>,
    final_n: usize,
    bits: u32,
) -> Vec<RankedResult> {
    let mut best: BTreeMap<u64, (u16, CategoryId)> = BTreeMap::new();
    for (category, hits) in per_category {
        for hit in hits {
            best.entry(hit.listing_id)
                .and_modify(|entry| {
                    if (hit.hamming, *category) < *entry {
                        *entry = (hit.hamming, *category);
                    }
                })
                .or_insert((hit.hamming, *category));
        }
    }
    let mut merged: Vec<RankedResult> = best
        .into_iter()
        .map(|(listing_id, (hamming, category_id))| {
            let s_appearance =
                (1.0 - f64::from(hamming) / f64::from(bits)) as f32;
            RankedResult {
                listing_id,
                category_id,
                hamming,
                s_appearance,
                s_aspect: 0.0,
                s_final: s_appearance,
            }
        })
        .collect();
    merged.sort_unstable_by(|a, b| {
        (a.hamming, a.listing_id).cmp(&(b.hamming, b.listing_id))
    });
    merged.truncate(final_n);
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(hamming: u16, listing_id: u64) -> Hit {
        Hit {
            hamming,
            listing_id,
        }
    }

    #[test]
    fn merges_sorted_lists_exactly() {
        let merged = merge_hit_lists(
            vec![
                vec![hit(1, 5), hit(4, 2)],
                vec![hit(0, 9), hit(4, 1)],
                vec![],
            ],
            3,
        );
        assert_eq!(merged, vec![hit(0, 9), hit(1, 5), hit(4, 1)]);
    }

    #[test]
    fn global_merge_dedups_keeping_best() {
        let mut per_category = BTreeMap::new();
        per_category.insert(3u32, vec![hit(2, 10), hit(5, 11)]);
        per_category.insert(7u32, vec![hit(2, 10), hit(1, 12)]);
        let merged = merge_global(&per_category, 10, 64);
        assert_eq!(merged.len(), 3);
        assert_eq!(merged[0].listing_id, 12);
        let dup = merged.iter().find(|r| r.listing_id == 10).unwrap();
        assert_eq!(dup.category_id, 3, "lowest category id kept on tie");
        assert_eq!(merged.iter().filter(|r| r.listing_id == 10).count(), 1);
        let expect = (1.0 - 2.0 / 64.0) as f32;
        assert_eq!(dup.s_appearance, expect);
        assert_eq!(dup.s_final, expect);
    }

    #[test]
    fn global_merge_truncates_to_final_n() {
        let mut per_category = BTreeMap::new();
        per_category.insert(1u32, (0..20).map(|i| hit(i as u16, i)).collect::<Vec<_>>());
        let merged = merge_global(&per_category, 5, 64);
        assert_eq!(merged.len(), 5);
        assert!(merged.windows(2).all(|w| w[0].hamming <= w[1].hamming));
    }
}
