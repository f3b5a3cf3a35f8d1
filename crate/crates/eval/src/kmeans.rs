//! Unsupervised baseline: k-means over binary hashes viewed as 0/1 real
//! vectors (k-means++ seeding, Lloyd iterations with a fixed cap and
//! pinned seed), plus the cluster-restricted search protocol.
//!
//! Two exactness-preserving accelerations keep this tractable at the
//! production signature width:
//!
//! - a centroid is the integer bit-count vector `s` of its members over
//!   the member count `m`, stored as bit-planes; the dot product
//!   `x . s = sum_b 2^b * popcount(x & plane_b)` is integer arithmetic
//!   and `||x - s/m||^2 = popcount(x) - 2 (x.s)/m + ||s||^2 / m^2`
//!   reproduces the Euclidean distances of textbook Lloyd;
//! - Hamerly-style distance bounds skip points whose assignment provably
//!   cannot change, yielding the same iterates as plain full scans.
//!
//! Oracle tests pin both claims: sliced distances against dense f64
//! centroids, and bounded against full-scan fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use visearch_core::sig::{hamming_words, popcount_and_words, BinarySignature};
use visearch_core::CategoryPartition;
use visearch_ranker::{scan_partition, Hit};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct KMeansParams {
    pub k: u32,
    pub max_iters: u32,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 16,
            max_iters: 50,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug)]
struct Centroid {
    m: u64,
    /// Bit-planes of the per-position member counts.
    planes: Vec<Vec<u64>>,
    /// ||s||^2 over the integer count vector.
    norm: f64,
}

impl Centroid {
    fn from_counts(counts: &[u32], m: u64, words: usize) -> Self {
        let max = counts.iter().copied().max().unwrap_or(0);
        let plane_count = (32 - max.leading_zeros()) as usize;
        let mut planes = vec![vec![0u64; words]; plane_count];
        let mut norm = 0.0f64;
        for (j, &c) in counts.iter().enumerate() {
            norm += f64::from(c) * f64::from(c);
            if c == 0 {
                continue;
            }
            let (w, t) = (j / 64, j % 64);
            for (b, plane) in planes.iter_mut().enumerate() {
                if (c >> b) & 1 == 1 {
                    plane[w] |= 1u64 << t;
                }
            }
        }
        Centroid { m, planes, norm }
    }

    #[inline]
    fn dot(&self, x: &[u64]) -> u64 {
        let mut total = 0u64;
        for (b, plane) in self.planes.iter().enumerate() {
            total += popcount_and_words(x, plane) << b;
        }
        total
    }

    /// `||x - s/m||^2 - popcount(x)`; the dropped term is constant per
    /// query, so argmin is unaffected. Full distances add it back.
    #[inline]
    fn partial_distance(&self, x: &[u64]) -> f64 {
        let m = self.m as f64;
        self.norm / (m * m) - 2.0 * (self.dot(x) as f64) / m
    }

    /// Dense mean vector, used for centroid movement norms.
    fn mean(&self, bits: usize) -> Vec<f64> {
        let m = self.m as f64;
        let mut out = vec![0.0f64; bits];
        for (b, plane) in self.planes.iter().enumerate() {
            let weight = (1u64 << b) as f64;
            for (w, &word) in plane.iter().enumerate() {
                let mut rest = word;
                while rest != 0 {
                    let t = rest.trailing_zeros() as usize;
                    let j = w * 64 + t;
                    if j < bits {
                        out[j] += weight;
                    }
                    rest &= rest - 1;
                }
            }
        }
        for v in &mut out {
            *v /= m;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct KMeansBaseline {
    pub k: u32,
    bits: u32,
    words_per_record: usize,
    centroids: Vec<Centroid>,
    /// One bucket per centroid, contiguous for the scan phase.
    buckets: Vec<CategoryPartition>,
    assignments: Vec<u32>,
    iterations_run: u32,
}

impl KMeansBaseline {
    /// Fits the baseline on packed signatures. `sigs` holds
    /// `ids.len()` records of `ceil(bits/8)` bytes each.
    pub fn fit(ids: &[u64], sigs: &[u8], bits: u32, params: &KMeansParams) -> Result<Self> {
        Self::fit_impl(ids, sigs, bits, params, true)
    }

    /// Reference fit with the distance bounds disabled; every iteration
    /// scans all centroids for every point. Exposed so tests can verify
    /// the bounded path reproduces it exactly.
    pub fn fit_full_scans(
        ids: &[u64],
        sigs: &[u8],
        bits: u32,
        params: &KMeansParams,
    ) -> Result<Self> {
        Self::fit_impl(ids, sigs, bits, params, false)
    }

    fn fit_impl(
        ids: &[u64],
        sigs: &[u8],
        bits: u32,
        params: &KMeansParams,
        accelerate: bool,
    ) -> Result<Self> {
        let hash_bytes = visearch_core::sig::byte_len(bits);
        if ids.is_empty() || sigs.len() != ids.len() * hash_bytes {
            return Err(Error::invalid("record arrays are inconsistent"));
        }
        let k = params.k as usize;
        if k == 0 || k > ids.len() {
            return Err(Error::invalid(format!(
                "k={k} must be in [1, {}]",
                ids.len()
            )));
        }
        if params.max_iters == 0 {
            return Err(Error::invalid("iteration cap must be positive"));
        }

        let words = hash_bytes.div_ceil(8);
        let record_words = pack_words(sigs, ids.len(), hash_bytes, words);
        let record = |i: usize| &record_words[i * words..(i + 1) * words];
        let popcounts: Vec<f64> = (0..ids.len())
            .map(|i| record(i).iter().map(|w| w.count_ones() as u64).sum::<u64>() as f64)
            .collect();

        // k-means++ seeding; seeds are data points, so the squared
        // Euclidean distance between points is their Hamming distance.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut seeds: Vec<usize> = Vec::with_capacity(k);
        seeds.push(rng.random_range(0..ids.len()));
        let mut d2: Vec<f64> = (0..ids.len())
            .map(|i| f64::from(hamming_words(record(i), record(seeds[0]))))
            .collect();
        while seeds.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.random_range(0..ids.len())
            } else {
                let mut target = rng.random::<f64>() * total;
                let mut pick = ids.len() - 1;
                for (i, w) in d2.iter().enumerate() {
                    if target < *w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
                pick
            };
            seeds.push(next);
            for i in 0..ids.len() {
                let d = f64::from(hamming_words(record(i), record(next)));
                if d < d2[i] {
                    d2[i] = d;
                }
            }
        }

        let mut centroids: Vec<Centroid> = seeds
            .iter()
            .map(|&s| {
                let mut counts = vec![0u32; bits as usize];
                scatter_bits(record(s), &mut counts);
                Centroid::from_counts(&counts, 1, words)
            })
            .collect();
        let mut means: Vec<Vec<f64>> = centroids.iter().map(|c| c.mean(bits as usize)).collect();

        // Euclidean distance (not squared) for the triangle-inequality
        // bounds. assignment, upper bound, lower bound per point.
        let full_scan = |i: usize, centroids: &[Centroid]| -> (u32, f64, f64) {
            let x = record(i);
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            let mut second = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = (popcounts[i] + centroid.partial_distance(x)).max(0.0).sqrt();
                if d < best_d {
                    second = best_d;
                    best_d = d;
                    best = c as u32;
                } else if d < second {
                    second = d;
                }
            }
            (best, best_d, second)
        };

        let scan_all = |centroids: &[Centroid]| -> Vec<(u32, f64, f64)> {
            #[cfg(feature = "parallel")]
            {
                (0..ids.len())
                    .into_par_iter()
                    .map(|i| full_scan(i, centroids))
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..ids.len()).map(|i| full_scan(i, centroids)).collect()
            }
        };

        let initial = scan_all(&centroids);
        let mut assignments: Vec<u32> = initial.iter().map(|(a, _, _)| *a).collect();
        let mut upper: Vec<f64> = initial.iter().map(|(_, u, _)| *u).collect();
        let mut lower: Vec<f64> = initial.iter().map(|(_, _, l)| *l).collect();
        let mut iterations_run = 1;

        while iterations_run < params.max_iters {
            // M-step: re-estimate counts; empty clusters keep their
            // previous centroid.
            let mut counts = vec![vec![0u32; bits as usize]; k];
            let mut sizes = vec![0u64; k];
            for (i, &c) in assignments.iter().enumerate() {
                sizes[c as usize] += 1;
                scatter_bits(record(i), &mut counts[c as usize]);
            }
            let mut movement = vec![0.0f64; k];
            for (c, centroid) in centroids.iter_mut().enumerate() {
                if sizes[c] == 0 {
                    continue;
                }
                *centroid = Centroid::from_counts(&counts[c], sizes[c], words);
                let new_mean = centroid.mean(bits as usize);
                movement[c] = means[c]
                    .iter()
                    .zip(&new_mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                means[c] = new_mean;
            }
            let max_move = movement.iter().copied().fold(0.0f64, f64::max);

            iterations_run += 1;
            let mut changed = false;
            for i in 0..ids.len() {
                let a = assignments[i] as usize;
                upper[i] += movement[a];
                lower[i] -= max_move;
                if accelerate && upper[i] < lower[i] {
                    continue;
                }
                // Tighten the upper bound before paying for a full scan.
                let exact = (popcounts[i] + centroids[a].partial_distance(record(i)))
                    .max(0.0)
                    .sqrt();
                upper[i] = exact;
                if accelerate && upper[i] < lower[i] {
                    continue;
                }
                let (best, best_d, second) = full_scan(i, &centroids);
                if best != assignments[i] {
                    assignments[i] = best;
                    changed = true;
                }
                upper[i] = best_d;
                lower[i] = second;
            }
            if !changed {
                break;
            }
        }

        // Contiguous per-cluster buckets for the scan phase.
        let mut bucket_records: Vec<(Vec<u64>, Vec<u8>)> = vec![(Vec::new(), Vec::new()); k];
        for (i, &c) in assignments.iter().enumerate() {
            bucket_records[c as usize].0.push(ids[i]);
            bucket_records[c as usize]
                .1
                .extend_from_slice(&sigs[i * hash_bytes..(i + 1) * hash_bytes]);
        }
        let buckets = bucket_records
            .into_iter()
            .enumerate()
            .map(|(c, (bucket_ids, bucket_sigs))| {
                CategoryPartition::new(c as u32, 0, hash_bytes as u32, bucket_ids, bucket_sigs)
                    .map_err(Error::Core)
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(KMeansBaseline {
            k: params.k,
            bits,
            words_per_record: words,
            centroids,
            buckets,
            assignments,
            iterations_run,
        })
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn iterations_run(&self) -> u32 {
        self.iterations_run
    }

    pub fn cluster_len(&self, cluster: usize) -> usize {
        self.buckets[cluster].len()
    }

    /// Full squared Euclidean distances from `query` (as 0/1 reals) to
    /// every centroid, ascending, ties by cluster index.
    pub fn centroid_distances(&self, query: &BinarySignature) -> Result<Vec<(f64, u32)>> {
        let words = self.query_words(query)?;
        let p = query.count_ones() as f64;
        let mut out: Vec<(f64, u32)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(c, centroid)| (p + centroid.partial_distance(&words), c as u32))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(out)
    }

    /// The baseline search protocol: nearest `n_clusters` centroids by
    /// Euclidean distance, top `m` by Hamming within each, merged by
    /// (hamming, listing id). Callers truncate the candidates at K.
    pub fn search(
        &self,
        query: &BinarySignature,
        n_clusters: usize,
        m: usize,
    ) -> Result<Vec<Hit>> {
        if n_clusters == 0 || m == 0 {
            return Err(Error::invalid("cluster count and M must be positive"));
        }
        let ranked = self.centroid_distances(query)?;
        let mut candidates: Vec<Hit> = Vec::new();
        for (_, cluster) in ranked.iter().take(n_clusters) {
            let bucket = &self.buckets[*cluster as usize];
            if bucket.is_empty() {
                continue;
            }
            candidates.extend(scan_partition(bucket, query, m)?);
        }
        candidates.sort_unstable();
        Ok(candidates)
    }

    fn query_words(&self, query: &BinarySignature) -> Result<Vec<u64>> {
        if query.bits() != self.bits {
            return Err(Error::invalid(format!(
                "query is {} bits, baseline holds {}",
                query.bits(),
                self.bits
            )));
        }
        let hash_bytes = visearch_core::sig::byte_len(self.bits);
        Ok(pack_words(query.as_bytes(), 1, hash_bytes, self.words_per_record))
    }
}

/// Packs byte records into little-endian u64 words, zero-padding tails.
fn pack_words(sigs: &[u8], count: usize, hash_bytes: usize, words: usize) -> Vec<u64> {
    let mut out = vec![0u64; count * words];
    for i in 0..count {
        let rec = &sigs[i * hash_bytes..(i + 1) * hash_bytes];
        for (w, chunk) in rec.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            out[i * words + w] = u64::from_le_bytes(buf);
        }
    }
    out
}

fn scatter_bits(words: &[u64], counts: &mut [u32]) {
    for (w, &word) in words.iter().enumerate() {
        let mut rest = word;
        while rest != 0 {
            let t = rest.trailing_zeros() as usize;
            counts[w * 64 + t] += 1;
            rest &= rest - 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use visearch_core::sig::byte_len;

    fn random_records(n: usize, bits: u32, seed: u64) -> (Vec<u64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<u64> = (0..n as u64).collect();
        let sigs: Vec<u8> = (0..n * byte_len(bits)).map(|_| rng.random()).collect();
        (ids, sigs)
    }

    fn signature_of(sigs: &[u8], i: usize, bits: u32) -> BinarySignature {
        let hb = byte_len(bits);
        BinarySignature::from_bytes(bits, sigs[i * hb..(i + 1) * hb].to_vec()).unwrap()
    }

    #[test]
    fn fit_is_seed_deterministic() {
        let (ids, sigs) = random_records(300, 128, 51);
        let params = KMeansParams {
            k: 8,
            max_iters: 50,
            seed: 9,
        };
        let a = KMeansBaseline::fit(&ids, &sigs, 128, &params).unwrap();
        let b = KMeansBaseline::fit(&ids, &sigs, 128, &params).unwrap();
        assert_eq!(a.assignments(), b.assignments());
        assert_eq!(a.iterations_run(), b.iterations_run());
    }

    #[test]
    fn bounded_fit_equals_full_scan_fit() {
        // The Hamerly bounds must not change a single assignment.
        for seed in [1u64, 2, 3, 4] {
            let (ids, sigs) = random_records(250, 96, 500 + seed);
            let params = KMeansParams {
                k: 7,
                max_iters: 50,
                seed,
            };
            let fast = KMeansBaseline::fit(&ids, &sigs, 96, &params).unwrap();
            let slow = KMeansBaseline::fit_full_scans(&ids, &sigs, 96, &params).unwrap();
            assert_eq!(fast.assignments(), slow.assignments(), "seed {seed}");
            assert_eq!(fast.iterations_run(), slow.iterations_run());
        }
    }

    #[test]
    fn sliced_distances_match_float_oracle() {
        // The bit-plane arithmetic must reproduce textbook Lloyd
        // distances: compare against dense f64 centroids.
        let (ids, sigs) = random_records(200, 64, 52);
        let baseline = KMeansBaseline::fit(
            &ids,
            &sigs,
            64,
            &KMeansParams {
                k: 6,
                max_iters: 10,
                seed: 3,
            },
        )
        .unwrap();

        // Dense centroids from the final assignments.
        let mut sums = vec![vec![0f64; 64]; 6];
        let mut sizes = vec![0f64; 6];
        for (i, &c) in baseline.assignments().iter().enumerate() {
            sizes[c as usize] += 1.0;
            let sig = signature_of(&sigs, i, 64);
            for j in 0..64 {
                if sig.get(j) {
                    sums[c as usize][j as usize] += 1.0;
                }
            }
        }
        for i in (0..200).step_by(17) {
            let q = signature_of(&sigs, i, 64);
            let got = baseline.centroid_distances(&q).unwrap();
            let mut want: Vec<(f64, u32)> = (0..6)
                .map(|c| {
                    if sizes[c] == 0.0 {
                        return (f64::INFINITY, c as u32);
                    }
                    let d2: f64 = (0..64)
                        .map(|j| {
                            let x = f64::from(u8::from(q.get(j)));
                            let m = sums[c][j as usize] / sizes[c];
                            (x - m) * (x - m)
                        })
                        .sum();
                    (d2, c as u32)
                })
                .collect();
            want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for ((dg, cg), (dw, cw)) in got.iter().zip(&want) {
                assert_eq!(cg, cw);
                assert!((dg - dw).abs() < 1e-6, "distance {dg} vs oracle {dw}");
            }
        }
    }

    #[test]
    fn toy_search_matches_protocol_oracle() {
        // 20 items, k'=4: find top-N nearest centroids, then the M most
        // similar images within each cluster, following the protocol
        // verbatim with naive arithmetic.
        let (ids, sigs) = random_records(20, 64, 53);
        let baseline = KMeansBaseline::fit(
            &ids,
            &sigs,
            64,
            &KMeansParams {
                k: 4,
                max_iters: 50,
                seed: 4,
            },
        )
        .unwrap();
        let query = signature_of(&sigs, 11, 64);
        let (n_clusters, m) = (2usize, 3usize);
        let got = baseline.search(&query, n_clusters, m).unwrap();

        let ranked = baseline.centroid_distances(&query).unwrap();
        let mut want: Vec<Hit> = Vec::new();
        for (_, cluster) in ranked.iter().take(n_clusters) {
            let mut members: Vec<Hit> = baseline
                .assignments()
                .iter()
                .enumerate()
                .filter(|(_, c)| **c == *cluster)
                .map(|(i, _)| {
                    let sig = signature_of(&sigs, i, 64);
                    Hit {
                        hamming: visearch_core::sig::hamming(&query, &sig).unwrap() as u16,
                        listing_id: ids[i],
                    }
                })
                .collect();
            members.sort_unstable();
            members.truncate(m);
            want.extend(members);
        }
        want.sort_unstable();
        assert_eq!(got, want);
    }

    #[test]
    fn k_equals_one_degenerates_to_exhaustive() {
        let (ids, sigs) = random_records(50, 64, 54);
        let baseline = KMeansBaseline::fit(
            &ids,
            &sigs,
            64,
            &KMeansParams {
                k: 1,
                max_iters: 50,
                seed: 5,
            },
        )
        .unwrap();
        let query = signature_of(&sigs, 7, 64);
        let got = baseline.search(&query, 1, 50).unwrap();
        assert_eq!(got.len(), 50);
        // Exhaustive brute force over everything.
        let mut want: Vec<Hit> = (0..50)
            .map(|i| Hit {
                hamming: visearch_core::sig::hamming(&query, &signature_of(&sigs, i, 64)).unwrap()
                    as u16,
                listing_id: ids[i],
            })
            .collect();
        want.sort_unstable();
        assert_eq!(got, want);
        assert_eq!(got[0].listing_id, 7);
        assert_eq!(got[0].hamming, 0);
    }

    #[test]
    fn stored_hash_retrieved_at_rank_one_with_all_clusters() {
        let (ids, sigs) = random_records(60, 128, 55);
        let baseline = KMeansBaseline::fit(
            &ids,
            &sigs,
            128,
            &KMeansParams {
                k: 8,
                max_iters: 50,
                seed: 6,
            },
        )
        .unwrap();
        let query = signature_of(&sigs, 33, 128);
        let got = baseline.search(&query, 8, 5).unwrap();
        assert_eq!(got[0].listing_id, 33);
        assert_eq!(got[0].hamming, 0);
    }

    #[test]
    fn invalid_k_rejected() {
        let (ids, sigs) = random_records(5, 64, 56);
        for k in [0u32, 6] {
            assert!(KMeansBaseline::fit(
                &ids,
                &sigs,
                64,
                &KMeansParams {
                    k,
                    max_iters: 10,
                    seed: 1
                }
            )
            .is_err());
        }
    }
}
