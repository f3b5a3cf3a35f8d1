//! Surrogate for the trained network's split topology: one forward pass
//! maps a feature vector to a binary semantic hash (sigmoid-threshold
//! binarization) and to top-N leaf categories with softmax confidences.
//!
//! The projection matrix is regenerated, never stored: `W` is `B x D`
//! i.i.d. standard normal entries drawn row-major from
//! `ChaCha8Rng::seed_from_u64(seed)` via `rand_distr::StandardNormal`
//! sampled as `f32`, and the bias vector is zero. ChaCha8 has a fixed,
//! portable stream, so the same `(seed, B, D)` yields identical
//! signatures across runs and platforms.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sig::BinarySignature;

pub type FeatureVector = Vec<f32>;
pub type CategoryId = u32;

/// Magic and layout of the persisted projector descriptor. Only the
/// regeneration parameters are stored; `W` is never serialized.
/// Layout (little-endian): "HMPJ", u16 model version, u64 seed, u32 B, u32 D.
pub const PROJECTOR_MAGIC: &[u8; 4] = b"HMPJ";
const PROJECTOR_LEN: usize = 4 + 2 + 8 + 4 + 4;

/// Random-hyperplane hash projector standing in for the hashing branch.
#[derive(Clone)]
pub struct HashProjector {
    seed: u64,
    version: u32,
    bits: u32,
    dim: u32,
    weights: Vec<f32>, // row-major B x D
    bias: Vec<f32>,
}

impl HashProjector {
    /// Regenerates the projector from its descriptor.
    pub fn new(seed: u64, version: u32, bits: u32, dim: u32) -> Result<Self> {
        if bits == 0 || dim == 0 {
            return Err(Error::config("projector bits and dim must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = StandardNormal;
        let weights: Vec<f32> = (0..bits as usize * dim as usize)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Ok(HashProjector {
            seed,
            version,
            bits,
            dim,
            weights,
            bias: vec![0.0; bits as usize],
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Binarizes sigmoid activations at 0.5: bit k is set iff
    /// `w_k . x + b_k > 0` (strictly; a dot of exactly zero maps to 0).
    /// The AVX2+FMA variant is dispatched at runtime and computes the
    /// same fixed-order lanes, so signatures are identical either way.
    pub fn extract_hash(&self, features: &[f32]) -> Result<BinarySignature> {
        self.check_features(features)?;
        #[cfg(target_arch = "x86_64")]
        {
            if *HAVE_AVX2_FMA {
                // Safety: guarded by the runtime feature check.
                return Ok(unsafe { self.extract_rows_avx2(features) });
            }
        }
        Ok(self.extract_rows(features))
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn extract_rows_avx2(&self, features: &[f32]) -> BinarySignature {
        self.extract_rows(features)
    }

    #[inline(always)]
    fn extract_rows(&self, features: &[f32]) -> BinarySignature {
        let dim = self.dim as usize;
        let mut sig = BinarySignature::zeros(self.bits);
        for k in 0..self.bits as usize {
            let row = &self.weights[k * dim..(k + 1) * dim];
            if dot(row, features) + self.bias[k] > 0.0 {
                sig.set(k as u32, true);
            }
        }
        sig
    }

    /// Hashes a batch. Parallel over items when the `parallel` feature is
    /// enabled; bit-identical to the sequential path either way.
    pub fn extract_hash_batch(&self, features: &[FeatureVector]) -> Result<Vec<BinarySignature>> {
        for f in features {
            self.check_features(f)?;
        }
        #[cfg(feature = "parallel")]
        {
            features
                .par_iter()
                .map(|f| self.extract_hash(f))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            features.iter().map(|f| self.extract_hash(f)).collect()
        }
    }

    fn check_features(&self, features: &[f32]) -> Result<()> {
        if features.len() != self.dim as usize {
            return Err(Error::DimMismatch {
                expected: self.dim as usize,
                got: features.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vector contains non-finite values"));
        }
        Ok(())
    }

    /// Writes the regeneration descriptor.
    pub fn save_descriptor(&self, w: &mut impl Write) -> Result<()> {
        if self.version > u32::from(u16::MAX) {
            return Err(Error::config("model version does not fit in u16"));
        }
        w.write_all(PROJECTOR_MAGIC)?;
        w.write_all(&(self.version as u16).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.bits.to_le_bytes())?;
        w.write_all(&self.dim.to_le_bytes())?;
        Ok(())
    }

    /// Reads a descriptor and regenerates the projector from it.
    pub fn load_descriptor(r: &mut impl Read) -> Result<Self> {
        let mut buf = [0u8; PROJECTOR_LEN];
        r.read_exact(&mut buf)
            .map_err(|e| Error::corruption("header length", e.to_string()))?;
        if &buf[0..4] != PROJECTOR_MAGIC {
            return Err(Error::corruption(
                "magic",
                format!("expected {PROJECTOR_MAGIC:?}, got {:?}", &buf[0..4]),
            ));
        }
        let version = u16::from_le_bytes(buf[4..6].try_into().unwrap());
        let seed = u64::from_le_bytes(buf[6..14].try_into().unwrap());
        let bits = u32::from_le_bytes(buf[14..18].try_into().unwrap());
        let dim = u32::from_le_bytes(buf[18..22].try_into().unwrap());
        HashProjector::new(seed, u32::from(version), bits, dim)
    }
}

#[cfg(target_arch = "x86_64")]
static HAVE_AVX2_FMA: std::sync::LazyLock<bool> = std::sync::LazyLock::new(|| {
    std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
});

/// Fixed-order 8-lane dot product. The lane structure pins the summation
/// order so signatures are reproducible.
#[inline]
fn dot(w: &[f32], x: &[f32]) -> f32 {
    debug_assert_eq!(w.len(), x.len());
    let mut acc = [0.0f32; 8];
    let mut chunks_w = w.chunks_exact(8);
    let mut chunks_x = x.chunks_exact(8);
    for (cw, cx) in (&mut chunks_w).zip(&mut chunks_x) {
        for i in 0..8 {
            acc[i] += cw[i] * cx[i];
        }
    }
    let mut tail = 0.0f32;
    for (a, b) in chunks_w.remainder().iter().zip(chunks_x.remainder()) {
        tail += a * b;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// How many predictions to keep.
#[derive(Clone, Copy, Debug)]
pub enum PredictMode {
    /// Exactly `min(n, #categories)` entries.
    AbsoluteTopN(usize),
    /// Shortest prefix whose confidence sum reaches `threshold`, capped
    /// at `n_max` entries.
    Cumulative { n_max: usize, threshold: f64 },
}

/// Ranked (category, confidence) list; confidences sum to 1 before
/// truncation.
#[derive(Clone, Debug)]
pub struct CategoryPrediction {
    pub ranked: Vec<(CategoryId, f64)>,
}

/// Nearest-centroid surrogate for leaf-category recognition: confidences
/// are `softmax(-||x - c||^2 / temperature)`.
#[derive(Clone, Debug)]
pub struct CategoryModel {
    centroids: Vec<(CategoryId, FeatureVector)>, // sorted by category id
    temperature: f64,
    dim: usize,
}

impl CategoryModel {
    pub fn new(centroids: Vec<(CategoryId, FeatureVector)>, temperature: f64) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::config("category model needs at least one category"));
        }
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::config("temperature must be positive"));
        }
        let dim = centroids[0].1.len();
        if centroids.iter().any(|(_, c)| c.len() != dim) {
            return Err(Error::config("centroids must share one dimension"));
        }
        let mut centroids = centroids;
        centroids.sort_by_key(|(id, _)| *id);
        centroids.dedup_by_key(|(id, _)| *id);
        Ok(CategoryModel {
            centroids,
            temperature,
            dim,
        })
    }

    /// Builds the model from labeled features by averaging per category.
    pub fn fit(
        dim: usize,
        labeled: impl IntoIterator<Item = (CategoryId, FeatureVector)>,
        temperature: f64,
    ) -> Result<Self> {
        use std::collections::BTreeMap;
        let mut sums: BTreeMap<CategoryId, (Vec<f64>, u64)> = BTreeMap::new();
        for (cat, f) in labeled {
            if f.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
            let entry = sums.entry(cat).or_insert_with(|| (vec![0.0; dim], 0));
            for (s, v) in entry.0.iter_mut().zip(&f) {
                *s += f64::from(*v);
            }
            entry.1 += 1;
        }
        let centroids = sums
            .into_iter()
            .map(|(cat, (sum, n))| {
                (
                    cat,
                    sum.iter().map(|s| (*s / n as f64) as f32).collect::<Vec<f32>>(),
                )
            })
            .collect();
        CategoryModel::new(centroids, temperature)
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn category_ids(&self) -> impl Iterator<Item = CategoryId> + '_ {
        self.centroids.iter().map(|(id, _)| *id)
    }

    /// Full softmax over all categories, sorted by descending confidence
    /// with ties broken by ascending category id.
    fn softmax_ranked(&self, features: &[f32]) -> Result<Vec<(CategoryId, f64)>> {
        if features.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        let logits: Vec<(CategoryId, f64)> = self
            .centroids
            .iter()
            .map(|(id, c)| {
                let d2: f64 = c
                    .iter()
                    .zip(features)
                    .map(|(a, b)| {
                        let d = f64::from(*a) - f64::from(*b);
                        d * d
                    })
                    .sum();
                (*id, -d2 / self.temperature)
            })
            .collect();
        let max = logits
            .iter()
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut ranked: Vec<(CategoryId, f64)> = logits
            .iter()
            .map(|(id, l)| (*id, (l - max).exp()))
            .collect();
        let total: f64 = ranked.iter().map(|(_, e)| e).sum();
        for (_, e) in &mut ranked {
            *e /= total;
        }
        // Stable sort keeps the ascending-id input order for exact ties.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(ranked)
    }

    pub fn predict(&self, features: &[f32], mode: PredictMode) -> Result<CategoryPrediction> {
        let ranked = self.softmax_ranked(features)?;
        let truncated = match mode {
            PredictMode::AbsoluteTopN(n) => {
                if n == 0 {
                    return Err(Error::invalid("top-N must be at least 1"));
                }
                ranked.into_iter().take(n).collect()
            }
            PredictMode::Cumulative { n_max, threshold } => {
                if n_max == 0 {
                    return Err(Error::invalid("top-N cap must be at least 1"));
                }
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::invalid("cumulative threshold must be in [0,1]"));
                }
                let mut out = Vec::new();
                let mut sum = 0.0;
                for (id, conf) in ranked {
                    out.push((id, conf));
                    sum += conf;
                    if sum >= threshold || out.len() >= n_max {
                        break;
                    }
                }
                out
            }
        };
        Ok(CategoryPrediction { ranked: truncated })
    }
}

/// Per-bit activation fractions over a signature collection.
pub fn bit_balance(signatures: &[BinarySignature]) -> Result<Vec<f64>> {
    let first = signatures
        .first()
        .ok_or_else(|| Error::invalid("bit_balance requires at least one signature"))?;
    let bits = first.bits();
    let mut counts = vec![0u64; bits as usize];
    for sig in signatures {
        if sig.bits() != bits {
            return Err(Error::WidthMismatch {
                left: bits,
                right: sig.bits(),
            });
        }
        for (byte_idx, byte) in sig.as_bytes().iter().enumerate() {
            let mut rest = *byte;
            while rest != 0 {
                let bit = rest.trailing_zeros() as usize;
                counts[byte_idx * 8 + bit] += 1;
                rest &= rest - 1;
            }
        }
    }
    let n = signatures.len() as f64;
    Ok(counts.iter().map(|c| *c as f64 / n).collect())
}
