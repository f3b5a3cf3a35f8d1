//! The measurement protocol: category-restricted search and the k-means
//! baseline evaluated with precision@K, accuracy@K and two NDCG flavors
//! (exact Hamming K-NN ground truth and category-level relevance).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use visearch_core::hash::{CategoryModel, HashProjector, PredictMode};
use visearch_core::sig::{byte_len, BinarySignature};
use visearch_core::{CategoryPartition, FeatureVector};
use visearch_ranker::{scan_partition, Hit, TopSelector};

use crate::dataset::{Split, SyntheticDataset};
use crate::error::{Error, Result};
use crate::kmeans::{KMeansBaseline, KMeansParams};

pub const CUMULATIVE_THRESHOLD: f64 = 0.95;

/// A validation query with its precomputed signature.
#[derive(Clone, Debug)]
pub struct EvalQuery {
    pub listing_id: u64,
    pub category_id: u32,
    pub features: FeatureVector,
    pub signature: BinarySignature,
}

/// Shared evaluation state: the indexed train split, the category
/// surrogate model and the query set. Hash extraction happens once here,
/// so timing loops exclude it.
pub struct EvalContext {
    pub bits: u32,
    pub partitions: BTreeMap<u32, Arc<CategoryPartition>>,
    pub train_ids: Vec<u64>,
    pub train_sigs: Vec<u8>,
    pub train_classes: Vec<u32>,
    pub class_of: BTreeMap<u64, u32>,
    pub model: CategoryModel,
    pub queries: Vec<EvalQuery>,
}

impl EvalContext {
    /// Hashes the train split, builds per-category partitions and an
    /// evenly-spaced validation query subset of at most `query_limit`.
    pub fn build(
        dataset: &SyntheticDataset,
        projector: &HashProjector,
        temperature: f64,
        query_limit: usize,
    ) -> Result<Self> {
        let bits = projector.bits();
        let hash_bytes = byte_len(bits);
        let dim = dataset.params.dim as usize;

        let train: Vec<_> = dataset.split_items(Split::Train).collect();
        let features: Vec<FeatureVector> = train.iter().map(|i| i.features.clone()).collect();
        let signatures = projector.extract_hash_batch(&features)?;

        let mut train_ids = Vec::with_capacity(train.len());
        let mut train_sigs = Vec::with_capacity(train.len() * hash_bytes);
        let mut train_classes = Vec::with_capacity(train.len());
        let mut class_of = BTreeMap::new();
        let mut per_cat: BTreeMap<u32, (Vec<u64>, Vec<u8>)> = BTreeMap::new();
        for (item, sig) in train.iter().zip(&signatures) {
            train_ids.push(item.listing_id);
            train_sigs.extend_from_slice(sig.as_bytes());
            train_classes.push(item.category_id);
            class_of.insert(item.listing_id, item.category_id);
            let entry = per_cat.entry(item.category_id).or_default();
            entry.0.push(item.listing_id);
            entry.1.extend_from_slice(sig.as_bytes());
        }
        let partitions = per_cat
            .into_iter()
            .map(|(cat, (ids, sigs))| {
                CategoryPartition::new(cat, 0, hash_bytes as u32, ids, sigs)
                    .map(|p| (cat, Arc::new(p)))
                    .map_err(Error::Core)
            })
            .collect::<Result<BTreeMap<_, _>>>()?;

        let model = CategoryModel::fit(
            dim,
            train.iter().map(|i| (i.category_id, i.features.clone())),
            temperature,
        )?;

        let valid: Vec<_> = dataset.split_items(Split::Valid).collect();
        let take = query_limit.max(1).min(valid.len());
        let mut queries = Vec::with_capacity(take);
        for qi in 0..take {
            let item = valid[qi * valid.len() / take];
            queries.push(EvalQuery {
                listing_id: item.listing_id,
                category_id: item.category_id,
                features: item.features.clone(),
                signature: projector.extract_hash(&item.features)?,
            });
        }
        Ok(EvalContext {
            bits,
            partitions,
            train_ids,
            train_sigs,
            train_classes,
            class_of,
            model,
            queries,
        })
    }

    pub fn train_len(&self) -> usize {
        self.train_ids.len()
    }

    pub fn same_class_count(&self, class: u32) -> usize {
        self.train_classes.iter().filter(|c| **c == class).count()
    }

    /// Exact top-k by (hamming, listing id) over the whole train split.
    pub fn exact_knn(&self, query: &BinarySignature, k: usize) -> Vec<Hit> {
        let hash_bytes = byte_len(self.bits);
        let mut sel = TopSelector::new(k);
        for (i, id) in self.train_ids.iter().enumerate() {
            let sig = &self.train_sigs[i * hash_bytes..(i + 1) * hash_bytes];
            let d = visearch_core::sig::hamming_bytes(query.as_bytes(), sig) as u16;
            sel.consider(d, *id);
        }
        sel.into_sorted()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Category-restricted search over the top-N predicted categories.
    Ours { n: usize, cumulative: bool },
    /// k-means baseline: top-N clusters, M per cluster.
    KMeans { k: u32, n: usize },
    /// Full scan of every category.
    Exhaustive,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Ours { n, cumulative: false } => format!("ours(N={n})"),
            Method::Ours { n, cumulative: true } => format!("ours-cum95(N={n})"),
            Method::KMeans { k, n } => format!("kmeans(k'={k},N={n})"),
            Method::Exhaustive => "exhaustive".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub k: usize,
    pub precision: f64,
    pub accuracy: f64,
    pub ndcg_knn: f64,
    pub ndcg_category: f64,
}

#[derive(Clone, Debug)]
pub struct MethodReport {
    pub label: String,
    pub rows: Vec<MetricRow>,
    /// Mean candidate-generation time per query, hash extraction
    /// excluded. Not deterministic; reported separately from metrics.
    pub mean_query_ms: f64,
}

/// Evaluation driver owning the shared context and lazily-fitted k-means
/// baselines (one per k', seed pinned from the context).
pub struct Evaluator {
    pub ctx: EvalContext,
    baseline_seed: u64,
    baselines: BTreeMap<u32, KMeansBaseline>,
    knn_cache: Vec<Vec<Hit>>,
    knn_cache_k: usize,
}

impl Evaluator {
    pub fn new(ctx: EvalContext, baseline_seed: u64) -> Self {
        Evaluator {
            ctx,
            baseline_seed,
            baselines: BTreeMap::new(),
            knn_cache: Vec::new(),
            knn_cache_k: 0,
        }
    }

    pub fn baseline(&mut self, k: u32) -> Result<&KMeansBaseline> {
        if !self.baselines.contains_key(&k) {
            let params = KMeansParams {
                k,
                max_iters: 50,
                seed: self.baseline_seed ^ u64::from(k),
            };
            let baseline = KMeansBaseline::fit(
                &self.ctx.train_ids,
                &self.ctx.train_sigs,
                self.ctx.bits,
                &params,
            )?;
            self.baselines.insert(k, baseline);
        }
        Ok(&self.baselines[&k])
    }

    /// Candidate list for one query under a method: merged, deduplicated
    /// by construction (record sets are disjoint), sorted by
    /// (hamming, listing id), length at most N x M.
    pub fn candidates(&self, method: Method, query: &EvalQuery, m: usize) -> Result<Vec<Hit>> {
        match method {
            Method::Ours { n, cumulative } => {
                let mode = if cumulative {
                    PredictMode::Cumulative {
                        n_max: n,
                        threshold: CUMULATIVE_THRESHOLD,
                    }
                } else {
                    PredictMode::AbsoluteTopN(n)
                };
                let predicted = self.ctx.model.predict(&query.features, mode)?;
                let mut out = Vec::new();
                for (cat, _) in &predicted.ranked {
                    if let Some(partition) = self.ctx.partitions.get(cat) {
                        out.extend(scan_partition(partition, &query.signature, m)?);
                    }
                }
                out.sort_unstable();
                Ok(out)
            }
            Method::KMeans { k, n } => {
                let baseline = self.baselines.get(&k).ok_or_else(|| {
                    Error::invalid(format!("k-means baseline k'={k} not fitted"))
                })?;
                baseline.search(&query.signature, n, m)
            }
            Method::Exhaustive => {
                let mut out = Vec::new();
                for partition in self.ctx.partitions.values() {
                    out.extend(scan_partition(partition, &query.signature, m)?);
                }
                out.sort_unstable();
                Ok(out)
            }
        }
    }

    fn ensure_knn(&mut self, k: usize) {
        if self.knn_cache_k >= k && !self.knn_cache.is_empty() {
            return;
        }
        let ctx = &self.ctx;
        #[cfg(feature = "parallel")]
        {
            self.knn_cache = ctx
                .queries
                .par_iter()
                .map(|q| ctx.exact_knn(&q.signature, k))
                .collect();
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.knn_cache = ctx
                .queries
                .iter()
                .map(|q| ctx.exact_knn(&q.signature, k))
                .collect();
        }
        self.knn_cache_k = k;
    }

    /// Runs a method over the whole query set at every K in the grid.
    /// `m` is the per-category / per-cluster fetch size (M=50 in the
    /// reference protocol). Exhaustive fetches max(k_grid) per scan.
    pub fn evaluate(&mut self, method: Method, k_grid: &[usize], m: usize) -> Result<MethodReport> {
        if self.ctx.partitions.is_empty() || self.ctx.train_ids.is_empty() {
            return Err(Error::invalid("evaluation needs a nonempty index"));
        }
        if k_grid.is_empty() {
            return Err(Error::invalid("K grid must be nonempty"));
        }
        if let Method::KMeans { k, .. } = method {
            self.baseline(k)?;
        }
        let k_max = *k_grid.iter().max().unwrap();
        self.ensure_knn(k_max);
        let fetch = match method {
            Method::Exhaustive => k_max.max(m),
            _ => m,
        };

        let start = Instant::now();
        let all_candidates: Vec<Vec<Hit>> = self
            .ctx
            .queries
            .iter()
            .map(|q| self.candidates(method, q, fetch))
            .collect::<Result<Vec<_>>>()?;
        let mean_query_ms =
            start.elapsed().as_secs_f64() * 1e3 / self.ctx.queries.len() as f64;

        let mut rows = Vec::with_capacity(k_grid.len());
        for &k in k_grid {
            let mut precision = 0.0;
            let mut accuracy = 0.0;
            let mut ndcg_knn = 0.0;
            let mut ndcg_category = 0.0;
            for (qi, query) in self.ctx.queries.iter().enumerate() {
                let top_k = &all_candidates[qi][..all_candidates[qi].len().min(k)];
                let same_class = |id: u64| self.ctx.class_of.get(&id) == Some(&query.category_id);

                let hits = top_k.iter().filter(|h| same_class(h.listing_id)).count();
                precision += hits as f64 / k as f64;
                accuracy += f64::from(hits > 0);

                let gt: HashSet<u64> = self.knn_cache[qi]
                    .iter()
                    .take(k)
                    .map(|h| h.listing_id)
                    .collect();
                ndcg_knn += ndcg(top_k, |id| gt.contains(&id), gt.len());
                let ideal = self.ctx.same_class_count(query.category_id).min(k);
                ndcg_category += ndcg(top_k, same_class, ideal);
            }
            let q = self.ctx.queries.len() as f64;
            rows.push(MetricRow {
                k,
                precision: precision / q,
                accuracy: accuracy / q,
                ndcg_knn: ndcg_knn / q,
                ndcg_category: ndcg_category / q,
            });
        }
        Ok(MethodReport {
            label: method.label(),
            rows,
            mean_query_ms,
        })
    }

    /// Convenience lookup: accuracy@K from a report.
    pub fn metric_at(report: &MethodReport, k: usize) -> Option<&MetricRow> {
        report.rows.iter().find(|r| r.k == k)
    }
}

/// Position-discounted gain with binary relevance: DCG over the returned
/// prefix divided by the DCG of an ideal list with `ideal_count`
/// relevant results.
fn ndcg(results: &[Hit], relevant: impl Fn(u64) -> bool, ideal_count: usize) -> f64 {
    if ideal_count == 0 {
        return 0.0;
    }
    let dcg: f64 = results
        .iter()
        .enumerate()
        .filter(|(_, h)| relevant(h.listing_id))
        .map(|(i, _)| 1.0 / ((i as f64 + 2.0).log2()))
        .sum();
    let idcg: f64 = (0..ideal_count)
        .map(|i| 1.0 / ((i as f64 + 2.0).log2()))
        .sum();
    dcg / idcg
}

/// Categories known to the evaluation index.
pub fn context_categories(ctx: &EvalContext) -> BTreeSet<u32> {
    ctx.partitions.keys().copied().collect()
}
