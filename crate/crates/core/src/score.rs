//! Scoring algebra: appearance score, aspect matching score and the
//! blended final score used for re-ranking.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::sig::DEFAULT_SIGNATURE_BITS;

/// One (name, value) product attribute. Name and value are trimmed on
/// construction and compared case-sensitively.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Aspect {
    pub name: String,
    pub value: String,
}

impl Aspect {
    pub fn new(name: impl AsRef<str>, value: impl AsRef<str>) -> Self {
        Aspect {
            name: name.as_ref().trim().to_string(),
            value: value.as_ref().trim().to_string(),
        }
    }
}

/// Deduplicated set of aspects attached to a listing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AspectSet {
    entries: BTreeSet<Aspect>,
}

impl AspectSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, aspect: Aspect) {
        self.entries.insert(aspect);
    }

    pub fn contains(&self, aspect: &Aspect) -> bool {
        self.entries.contains(aspect)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Aspect> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<Aspect> for AspectSet {
    fn from_iter<T: IntoIterator<Item = Aspect>>(iter: T) -> Self {
        AspectSet {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Reward points per aspect name. Size, brand and price carry more weight
/// than the rest; all weights are strictly positive.
#[derive(Clone, Debug)]
pub struct AspectWeights {
    weights: BTreeMap<String, f64>,
    default_weight: f64,
}

impl AspectWeights {
    pub fn new(weights: BTreeMap<String, f64>, default_weight: f64) -> Result<Self> {
        if default_weight <= 0.0 || !default_weight.is_finite() {
            return Err(Error::invalid("default aspect weight must be positive"));
        }
        for (name, w) in &weights {
            if *w <= 0.0 || !w.is_finite() {
                return Err(Error::invalid(format!(
                    "aspect weight for {name:?} must be positive"
                )));
            }
        }
        Ok(AspectWeights {
            weights,
            default_weight,
        })
    }

    pub fn weight_for(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(self.default_weight)
    }
}

impl Default for AspectWeights {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        for name in ["size", "brand", "price"] {
            weights.insert(name.to_string(), 3.0);
        }
        AspectWeights {
            weights,
            default_weight: 1.0,
        }
    }
}

/// Blend weight and signature width used by the ranking path.
#[derive(Clone, Copy, Debug)]
pub struct ScoringConfig {
    pub lambda: f64,
    pub bits: u32,
}

impl ScoringConfig {
    pub fn new(lambda: f64, bits: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!(
                "lambda must be in [0,1], got {lambda}"
            )));
        }
        if bits == 0 {
            return Err(Error::invalid("signature width must be positive"));
        }
        Ok(ScoringConfig { lambda, bits })
    }
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            lambda: 0.75,
            bits: DEFAULT_SIGNATURE_BITS,
        }
    }
}

/// Appearance score from a Hamming distance: `1 - d/B`, so identical
/// signatures score 1 and complements score 0. Higher is better, which
/// keeps the blended score a single descending sort key.
pub fn appearance_score(distance: u32, bits: u32) -> Result<f64> {
    if bits == 0 {
        return Err(Error::invalid("signature width must be positive"));
    }
    if distance > bits {
        return Err(Error::invalid(format!(
            "distance {distance} exceeds signature width {bits}"
        )));
    }
    Ok(1.0 - f64::from(distance) / f64::from(bits))
}

/// Weighted fraction of predicted aspects with an exact (name, value)
/// match in the ground truth. Empty prediction lists score 0 (the
/// denominator would be undefined); the result is clamped to [0,1].
pub fn aspect_score(predicted: &[(Aspect, f64)], ground_truth: &AspectSet) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut matched = 0.0;
    for (aspect, weight) in predicted {
        total += weight;
        if ground_truth.contains(aspect) {
            matched += weight;
        }
    }
    if total <= 0.0 {
        return 0.0;
    }
    (matched / total).clamp(0.0, 1.0)
}

/// Final score `lambda * s_appearance + (1 - lambda) * s_aspect`.
pub fn blended_score(s_appearance: f64, s_aspect: f64, cfg: &ScoringConfig) -> Result<f64> {
    for (label, s) in [("appearance", s_appearance), ("aspect", s_aspect)] {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!(
                "{label} score must be in [0,1], got {s}"
            )));
        }
    }
    Ok(cfg.lambda * s_appearance + (1.0 - cfg.lambda) * s_aspect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn appearance_score_examples() {
        assert_eq!(appearance_score(0, 4096).unwrap(), 1.0);
        assert_eq!(appearance_score(4096, 4096).unwrap(), 0.0);
        assert_eq!(appearance_score(1024, 4096).unwrap(), 0.75);
        assert!(appearance_score(4097, 4096).is_err());
    }

    #[test]
    fn aspect_score_direct_substitution() {
        // (1*1 + 2*0) / 3
        let predicted = vec![
            (Aspect::new("color", "blue"), 1.0),
            (Aspect::new("brand", "X"), 2.0),
        ];
        let gt: AspectSet = [Aspect::new("color", "blue"), Aspect::new("brand", "Y")]
            .into_iter()
            .collect();
        let s = aspect_score(&predicted, &gt);
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aspect_score_empty_prediction_is_zero() {
        let gt: AspectSet = [Aspect::new("color", "blue")].into_iter().collect();
        assert_eq!(aspect_score(&[], &gt), 0.0);
    }

    #[test]
    fn aspect_score_full_copy_is_one() {
        let gt: AspectSet = [
            Aspect::new("color", "blue"),
            Aspect::new("brand", "X"),
            Aspect::new("size", "M"),
        ]
        .into_iter()
        .collect();
        let predicted: Vec<(Aspect, f64)> = gt.iter().cloned().map(|a| (a, 1.0)).collect();
        assert_eq!(aspect_score(&predicted, &gt), 1.0);
    }

    #[test]
    fn aspects_trimmed_and_deduplicated() {
        let mut set = AspectSet::new();
        set.insert(Aspect::new(" color ", "blue "));
        set.insert(Aspect::new("color", "blue"));
        assert_eq!(set.len(), 1);
        assert!(set.contains(&Aspect::new("color", "blue")));
    }

    #[test]
    fn blended_score_examples() {
        let cfg = ScoringConfig::default();
        assert!((blended_score(0.8, 1.0, &cfg).unwrap() - 0.85).abs() < 1e-12);
        let all_app = ScoringConfig::new(1.0, 4096).unwrap();
        assert_eq!(blended_score(0.3, 0.9, &all_app).unwrap(), 0.3);
        let all_asp = ScoringConfig::new(0.0, 4096).unwrap();
        assert_eq!(blended_score(0.3, 0.9, &all_asp).unwrap(), 0.9);
        assert!(blended_score(1.2, 0.0, &cfg).is_err());
        assert!(blended_score(0.0, -0.1, &cfg).is_err());
    }

    #[test]
    fn default_weights_favor_size_brand_price() {
        let w = AspectWeights::default();
        assert_eq!(w.weight_for("size"), 3.0);
        assert_eq!(w.weight_for("brand"), 3.0);
        assert_eq!(w.weight_for("price"), 3.0);
        assert_eq!(w.weight_for("color"), 1.0);
        assert!(AspectWeights::new(BTreeMap::new(), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn appearance_strictly_decreasing(d in 0u32..4096) {
            let a = appearance_score(d, 4096).unwrap();
            let b = appearance_score(d + 1, 4096).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn blended_monotone_in_each_argument(
            s_app in 0.0f64..=1.0,
            s_asp in 0.0f64..=1.0,
            delta in 0.0f64..=0.5,
            lambda in 0.0f64..=1.0,
        ) {
            let cfg = ScoringConfig::new(lambda, 4096).unwrap();
            let base = blended_score(s_app, s_asp, &cfg).unwrap();
            let up_app = blended_score((s_app + delta).min(1.0), s_asp, &cfg).unwrap();
            let up_asp = blended_score(s_app, (s_asp + delta).min(1.0), &cfg).unwrap();
            prop_assert!(up_app >= base - 1e-12);
            prop_assert!(up_asp >= base - 1e-12);
        }

        #[test]
        fn aspect_score_bounded(n in 0usize..6, seed in 0u64..100) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let names = ["color", "brand", "size", "material"];
            let predicted: Vec<(Aspect, f64)> = (0..n)
                .map(|_| {
                    let name = names[rng.random_range(0..names.len())];
                    let value = format!("v{}", rng.random_range(0..3));
                    (Aspect::new(name, value), rng.random_range(0.5..4.0))
                })
                .collect();
            let gt: AspectSet = (0..rng.random_range(0..6))
                .map(|_| {
                    let name = names[rng.random_range(0..names.len())];
                    Aspect::new(name, format!("v{}", rng.random_range(0..3)))
                })
                .collect();
            let s = aspect_score(&predicted, &gt);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
