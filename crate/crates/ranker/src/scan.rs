//! Linear Hamming scans over category partitions. The inner loop is the
//! word-level popcount kernel feeding a bounded selector; the parallel
//! path splits a partition into per-worker sub-ranges (same balanced
//! arithmetic as the on-disk partition split) and merges the exact
//! sub-results, so worker count never changes the answer.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use visearch_core::sig::{hamming_bytes, BinarySignature};
use visearch_core::CategoryPartition;

use crate::error::{Error, Result};
use crate::query::Hit;
use crate::topn::TopSelector;

fn check_width(partition: &CategoryPartition, query: &BinarySignature) -> Result<()> {
    let q = query.as_bytes().len();
    let p = partition.hash_bytes() as usize;
    if q != p {
        return Err(Error::WidthMismatch {
            query: q,
            partition: p,
        });
    }
    Ok(())
}

fn scan_range(partition: &CategoryPartition, query: &[u8], start: usize, end: usize, n: usize) -> TopSelector {
    let mut sel = TopSelector::new(n);
    let ids = partition.listing_ids();
    for i in start..end {
        let d = hamming_bytes(query, partition.signature_at(i)) as u16;
        sel.consider(d, ids[i]);
    }
    sel
}

/// Exact top-N by Hamming distance over one partition, ties broken by
/// ascending listing id.
pub fn scan_partition(
    partition: &CategoryPartition,
    query: &BinarySignature,
    n: usize,
) -> Result<Vec<Hit>> {
    if n == 0 {
        return Err(Error::invalid("top-N must be at least 1"));
    }
    check_width(partition, query)?;
    Ok(scan_range(partition, query.as_bytes(), 0, partition.len(), n).into_sorted())
}

/// Scans one partition split into `workers` contiguous sub-partitions.
/// With the `parallel` feature the sub-partitions run on the rayon pool;
/// otherwise they run back to back. Results are identical either way.
pub fn scan_partition_workers(
    partition: &CategoryPartition,
    query: &BinarySignature,
    n: usize,
    workers: usize,
) -> Result<Vec<Hit>> {
    if n == 0 {
        return Err(Error::invalid("top-N must be at least 1"));
    }
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    check_width(partition, query)?;
    if workers == 1 || partition.len() <= 1 {
        return Ok(scan_range(partition, query.as_bytes(), 0, partition.len(), n).into_sorted());
    }

    let ranges = sub_ranges(partition.len(), workers);
    let q = query.as_bytes();

    #[cfg(feature = "parallel")]
    let partials: Vec<Vec<Hit>> = ranges
        .into_par_iter()
        .map(|(start, end)| scan_range(partition, q, start, end, n).into_sorted())
        .collect();

    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Vec<Hit>> = ranges
        .into_iter()
        .map(|(start, end)| scan_range(partition, q, start, end, n).into_sorted())
        .collect();

    Ok(crate::merge::merge_hit_lists(partials, n))
}

/// Balanced contiguous ranges; sizes differ by at most one with the
/// remainder on the lowest-indexed ranges, mirroring `split_partition`.
fn sub_ranges(len: usize, workers: usize) -> Vec<(usize, usize)> {
    let base = len / workers;
    let rem = len % workers;
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for i in 0..workers {
        let size = base + usize::from(i < rem);
        out.push((start, start + size));
        start += size;
    }
    out
}
