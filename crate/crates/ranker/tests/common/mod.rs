//! Shared corpus builders and the exhaustive-search oracle used by the
//! distributed exactness tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use visearch_core::sig::{byte_len, hamming_bytes, BinarySignature};
use visearch_core::CategoryPartition;
use visearch_ranker::RankedResult;

/// Whole-category partitions with ids `cat * 1_000_000 + i` and random
/// signatures.
pub fn build_corpus(
    categories: &[u32],
    per_category: usize,
    bits: u32,
    seed: u64,
) -> BTreeMap<u32, Arc<CategoryPartition>> {
    let hash_bytes = byte_len(bits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    categories
        .iter()
        .map(|cat| {
            let ids: Vec<u64> = (0..per_category as u64)
                .map(|i| u64::from(*cat) * 1_000_000 + i)
                .collect();
            let sigs: Vec<u8> = (0..per_category * hash_bytes).map(|_| rng.random()).collect();
            (
                *cat,
                Arc::new(
                    CategoryPartition::new(*cat, 0, hash_bytes as u32, ids, sigs).unwrap(),
                ),
            )
        })
        .collect()
}

pub fn random_signature(bits: u32, seed: u64) -> BinarySignature {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sig = BinarySignature::zeros(bits);
    for i in 0..bits {
        sig.set(i, rng.random());
    }
    sig
}

/// Signature stored at `index` within a category partition.
#[allow(dead_code)] // not every test binary pulls this in
pub fn stored_signature(partition: &CategoryPartition, index: usize, bits: u32) -> BinarySignature {
    BinarySignature::from_bytes(bits, partition.signature_at(index).to_vec()).unwrap()
}

/// Single-threaded exhaustive oracle following the protocol definition
/// directly: full sort per requested category, truncate to M, then a
/// global (hamming, listing id) merge with listing-level dedup keeping
/// the lowest (hamming, category).
pub fn oracle_search(
    records_by_cat: &BTreeMap<u32, Vec<(u64, Vec<u8>)>>,
    categories: &[u32],
    query: &BinarySignature,
    m: usize,
    final_n: usize,
    bits: u32,
) -> Vec<RankedResult> {
    let mut best: BTreeMap<u64, (u16, u32)> = BTreeMap::new();
    for cat in categories {
        let Some(records) = records_by_cat.get(cat) else {
            continue;
        };
        let mut scored: Vec<(u16, u64)> = records
            .iter()
            .map(|(id, sig)| (hamming_bytes(query.as_bytes(), sig) as u16, *id))
            .collect();
        scored.sort_unstable();
        for (d, id) in scored.into_iter().take(m) {
            let candidate = (d, *cat);
            best.entry(id)
                .and_modify(|e| {
                    if candidate < *e {
                        *e = candidate;
                    }
                })
                .or_insert(candidate);
        }
    }
    let mut flat: Vec<(u16, u64, u32)> = best
        .into_iter()
        .map(|(id, (d, cat))| (d, id, cat))
        .collect();
    flat.sort_unstable();
    flat.truncate(final_n);
    flat.into_iter()
        .map(|(hamming, listing_id, category_id)| {
            let s = (1.0 - f64::from(hamming) / f64::from(bits)) as f32;
            RankedResult {
                listing_id,
                category_id,
                hamming,
                s_appearance: s,
                s_aspect: 0.0,
                s_final: s,
            }
        })
        .collect()
}

/// Flattens whole-category partitions into oracle records.
pub fn corpus_records(
    corpus: &BTreeMap<u32, Arc<CategoryPartition>>,
) -> BTreeMap<u32, Vec<(u64, Vec<u8>)>> {
    corpus
        .iter()
        .map(|(cat, p)| {
            (
                *cat,
                p.iter().map(|(id, sig)| (id, sig.to_vec())).collect(),
            )
        })
        .collect()
}
