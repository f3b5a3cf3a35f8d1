//! Image-bytes-to-features surrogate. No image decoding happens at desk
//! scale: synthetic "images" either embed their feature vector directly
//! or get pseudo-random features derived from their dedup key, so the
//! whole pipeline stays deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hash::FeatureVector;
use crate::ingest::dedup_key;

/// Magic prefix of feature-embedding image payloads.
pub const EMBEDDED_MAGIC: &[u8; 4] = b"FEAT";

pub trait Featurizer: Send + Sync {
    fn dim(&self) -> u32;
    /// Maps raw image bytes to a feature vector. Must be deterministic.
    fn featurize(&self, image_bytes: &[u8]) -> FeatureVector;
}

/// Default featurizer: if the payload embeds a feature vector of the
/// right dimension (see [`embed_features`]) it is decoded; otherwise
/// features are sampled from `ChaCha8Rng` seeded with the first 8 bytes
/// (little-endian) of the payload's MD5 dedup key.
pub struct StandardFeaturizer {
    dim: u32,
}

impl StandardFeaturizer {
    pub fn new(dim: u32) -> Self {
        StandardFeaturizer { dim }
    }
}

impl Featurizer for StandardFeaturizer {
    fn dim(&self) -> u32 {
        self.dim
    }

    fn featurize(&self, image_bytes: &[u8]) -> FeatureVector {
        if let Some(features) = decode_embedded(image_bytes, self.dim) {
            return features;
        }
        let key = dedup_key(image_bytes).expect("featurize requires nonempty bytes");
        let seed = u64::from_le_bytes(key[0..8].try_into().unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

/// Builds a synthetic image payload embedding `features`; `salt` makes
/// otherwise-identical payloads distinct so the duplicate rate can be
/// controlled exactly.
pub fn embed_features(features: &[f32], salt: u64) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(4 + 4 + features.len() * 4 + 8);
    bytes.extend_from_slice(EMBEDDED_MAGIC);
    bytes.extend_from_slice(&(features.len() as u32).to_le_bytes());
    for v in features {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&salt.to_le_bytes());
    bytes
}

fn decode_embedded(bytes: &[u8], expected_dim: u32) -> Option<FeatureVector> {
    if bytes.len() < 8 || &bytes[0..4] != EMBEDDED_MAGIC {
        return None;
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if dim != expected_dim || bytes.len() < 8 + dim as usize * 4 {
        return None;
    }
    let mut features = Vec::with_capacity(dim as usize);
    for chunk in bytes[8..8 + dim as usize * 4].chunks_exact(4) {
        features.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Some(features)
}
