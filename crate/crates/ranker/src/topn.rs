//! Bounded top-N selection: a size-capped max-heap keyed by
//! (hamming, listing id), so a scan never sorts the whole partition.

use std::collections::BinaryHeap;

use crate::query::Hit;

pub struct TopSelector {
    cap: usize,
    heap: BinaryHeap<(u16, u64)>,
}

impl TopSelector {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1, "selection capacity must be at least 1");
        TopSelector {
            cap,
            heap: BinaryHeap::with_capacity(cap + 1),
        }
    }

    #[inline]
    pub fn consider(&mut self, hamming: u16, listing_id: u64) {
        if self.heap.len() < self.cap {
            self.heap.push((hamming, listing_id));
        } else if let Some(&worst) = self.heap.peek() {
            if (hamming, listing_id) < worst {
                self.heap.pop();
                self.heap.push((hamming, listing_id));
            }
        }
    }

    /// Current cutoff: candidates at or past this never enter.
    pub fn worst(&self) -> Option<(u16, u64)> {
        if self.heap.len() < self.cap {
            None
        } else {
            self.heap.peek().copied()
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Ascending (hamming, listing id).
    pub fn into_sorted(self) -> Vec<Hit> {
        let mut out: Vec<(u16, u64)> = self.heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|(hamming, listing_id)| Hit {
                hamming,
                listing_id,
            })
            .collect()
    }
}
