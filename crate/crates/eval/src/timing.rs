//! Search-time measurement: mean milliseconds per query per method over
//! repeated passes, hash extraction excluded (signatures are precomputed
//! in the evaluation context).

use std::time::Instant;

use crate::error::Result;
use crate::metrics::{Evaluator, Method};

#[derive(Clone, Debug)]
pub struct TimingRow {
    pub method: String,
    pub mean_ms: f64,
    /// Mean time per query divided into the exhaustive baseline's; > 1
    /// means faster than exhaustive.
    pub speedup_vs_exhaustive: Option<f64>,
}

/// Runs each method `repetitions` times over the context's query set.
/// The candidate fetch size is `m` per category or cluster; exhaustive
/// scans fetch `k_max`.
pub fn bench_timing(
    evaluator: &mut Evaluator,
    methods: &[Method],
    repetitions: usize,
    m: usize,
    k_max: usize,
) -> Result<Vec<TimingRow>> {
    let reps = repetitions.max(1);
    // Fit any k-means baselines outside the timed region.
    for method in methods {
        if let Method::KMeans { k, .. } = method {
            evaluator.baseline(*k)?;
        }
    }

    let mut means = Vec::with_capacity(methods.len());
    for method in methods {
        let fetch = match method {
            Method::Exhaustive => k_max.max(m),
            _ => m,
        };
        // Warm-up pass.
        for query in &evaluator.ctx.queries {
            let _ = evaluator.candidates(*method, query, fetch)?;
        }
        let start = Instant::now();
        for _ in 0..reps {
            for query in &evaluator.ctx.queries {
                let _ = evaluator.candidates(*method, query, fetch)?;
            }
        }
        let total = start.elapsed().as_secs_f64() * 1e3;
        means.push(total / (reps * evaluator.ctx.queries.len()) as f64);
    }

    let exhaustive_ms = methods
        .iter()
        .zip(&means)
        .find(|(m, _)| matches!(m, Method::Exhaustive))
        .map(|(_, ms)| *ms);
    Ok(methods
        .iter()
        .zip(means)
        .map(|(method, mean_ms)| TimingRow {
            method: method.label(),
            mean_ms,
            speedup_vs_exhaustive: match method {
                Method::Exhaustive => None,
                _ => exhaustive_ms.map(|e| e / mean_ms),
            },
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{GenParams, SyntheticDataset};
    use crate::metrics::EvalContext;
    use visearch_core::HashProjector;

    #[test]
    fn category_restriction_beats_exhaustive() {
        // 20 equal categories; scanning one predicted category touches
        // ~1/20 of the records.
        let ds = SyntheticDataset::generate(GenParams {
            classes: 20,
            per_class: 400,
            dim: 16,
            sigma: 0.3,
            seed: 71,
            ..GenParams::default()
        })
        .unwrap();
        let projector = HashProjector::new(72, 1, 256, 16).unwrap();
        let ctx = EvalContext::build(&ds, &projector, 1.0, 30).unwrap();
        let mut eval = Evaluator::new(ctx, 73);
        let rows = bench_timing(
            &mut eval,
            &[Method::Ours { n: 1, cumulative: false }, Method::Exhaustive],
            3,
            50,
            100,
        )
        .unwrap();
        let speedup = rows[0].speedup_vs_exhaustive.unwrap();
        assert!(speedup > 3.0, "speedup only {speedup:.1}x");
        assert!(rows[1].speedup_vs_exhaustive.is_none());
    }
}
