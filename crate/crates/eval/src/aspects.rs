//! Deterministic surrogate for the aspect classifier: ground-truth
//! aspects with independent per-entry corruption at a configurable rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use visearch_core::score::{Aspect, AspectWeights};

use crate::dataset::SyntheticDataset;
use crate::error::{Error, Result};

/// Returns the listing's aspects with each entry independently replaced
/// by a different same-name value with probability `noise_rate`, paired
/// with its reward weight. Deterministic per (dataset seed, listing).
pub fn predict_aspects_oracle(
    dataset: &SyntheticDataset,
    listing_id: u64,
    noise_rate: f64,
    weights: &AspectWeights,
) -> Result<Vec<(Aspect, f64)>> {
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(Error::invalid("noise rate must be in [0,1]"));
    }
    let item = dataset
        .item(listing_id)
        .ok_or(Error::UnknownListing(listing_id))?;
    let mut rng = ChaCha8Rng::seed_from_u64(
        dataset
            .params
            .seed
            .wrapping_add(listing_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let mut out = Vec::with_capacity(item.aspects.len());
    for aspect in item.aspects.iter() {
        let corrupted = noise_rate > 0.0 && rng.random_bool(noise_rate);
        let value = if corrupted {
            let pool: Vec<String> = dataset
                .aspect_values(&aspect.name)
                .into_iter()
                .filter(|v| *v != aspect.value)
                .collect();
            pool[rng.random_range(0..pool.len())].clone()
        } else {
            aspect.value.clone()
        };
        let w = weights.weight_for(&aspect.name);
        out.push((Aspect::new(&aspect.name, value), w));
    }
    Ok(out)
}
