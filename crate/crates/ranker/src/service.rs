//! The serving node: fans a query out to every cluster member (itself
//! via a direct call), merges partial results in two levels, optionally
//! re-ranks by aspects, and reports per-stage latency.

use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use visearch_cluster::{ClusterView, NodeId, RedistributionPlan};
use visearch_core::hash::{CategoryModel, FeatureVector, HashProjector, PredictMode};
use visearch_core::score::{Aspect, AspectWeights, ScoringConfig};
use visearch_core::sig::{byte_len, BinarySignature};
use visearch_core::CategoryId;

use crate::error::{Error, Result};
use crate::merge::{merge_global, merge_hit_lists};
use crate::node::{NodeState, PartitionLoader};
use crate::query::{Hit, PartialResult, QueryRequest, RankedResult, SearchResponse};
use crate::rerank::{rerank, AspectSource, RERANK_CAP};

/// Remote query dispatch. Failures are per-node: the fan-out treats them
/// as missing members and degrades instead of failing the query.
pub trait NodeTransport: Send + Sync {
    fn node_query(
        &self,
        node: &NodeId,
        req: &QueryRequest,
        timeout: Duration,
    ) -> Result<PartialResult>;
}

/// Transport for single-node deployments: any remote call fails.
pub struct NoTransport;

impl NodeTransport for NoTransport {
    fn node_query(&self, node: &NodeId, _: &QueryRequest, _: Duration) -> Result<PartialResult> {
        Err(Error::NodeUnreachable {
            node: node.to_string(),
            detail: "no transport configured".to_string(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Sub-partitions scanned concurrently per held partition.
    pub workers: usize,
    pub per_node_timeout: Duration,
    pub scoring: ScoringConfig,
    pub aspect_weights: AspectWeights,
    /// Default per-category fetch size (M).
    pub per_category: u32,
    /// Default final result count (N).
    pub final_n: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            per_node_timeout: Duration::from_millis(500),
            scoring: ScoringConfig::default(),
            aspect_weights: AspectWeights::default(),
            per_category: 50,
            final_n: 50,
        }
    }
}

pub struct SearchEngine {
    node: NodeId,
    cfg: SearchConfig,
    state: RwLock<Arc<NodeState>>,
    transport: Arc<dyn NodeTransport>,
    aspects: Option<Arc<dyn AspectSource>>,
}

impl SearchEngine {
    pub fn new(
        cfg: SearchConfig,
        state: NodeState,
        transport: Arc<dyn NodeTransport>,
        aspects: Option<Arc<dyn AspectSource>>,
    ) -> Self {
        SearchEngine {
            node: state.node.clone(),
            cfg,
            state: RwLock::new(Arc::new(state)),
            transport,
            aspects,
        }
    }

    pub fn node_id(&self) -> &NodeId {
        &self.node
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    /// Immutable state snapshot; queries keep using the snapshot they
    /// started with while redistribution swaps in a successor.
    pub fn snapshot(&self) -> Arc<NodeState> {
        Arc::clone(&self.state.read().unwrap())
    }

    /// Applies a membership change and loads/drops partitions per the
    /// redistribution plan.
    pub fn apply_view(
        &self,
        view: ClusterView,
        categories: &[CategoryId],
        loader: &dyn PartitionLoader,
    ) -> Result<RedistributionPlan> {
        let current = self.snapshot();
        let (next, plan) = current.apply_view(view, categories, loader)?;
        *self.state.write().unwrap() = Arc::new(next);
        Ok(plan)
    }

    /// Local scan over this node's partitions.
    pub fn node_search(&self, req: &QueryRequest) -> Result<PartialResult> {
        self.check_width(req)?;
        self.snapshot().node_search(req, self.cfg.workers)
    }

    fn check_width(&self, req: &QueryRequest) -> Result<()> {
        let expect = byte_len(self.cfg.scoring.bits);
        let got = req.signature.as_bytes().len();
        if got != expect {
            return Err(Error::WidthMismatch {
                query: got,
                partition: expect,
            });
        }
        Ok(())
    }

    pub fn fanout_search(&self, req: &QueryRequest, final_n: usize) -> Result<SearchResponse> {
        self.fanout_search_timed(req, final_n).map(|(resp, _, _)| resp)
    }

    /// Scatter to every view member, gather partials, merge per category
    /// and globally. Returns (response, scatter_ms, merge_ms).
    pub fn fanout_search_timed(
        &self,
        req: &QueryRequest,
        final_n: usize,
    ) -> Result<(SearchResponse, f64, f64)> {
        req.validate()?;
        self.check_width(req)?;
        let state = self.snapshot();
        if state.view.is_empty() {
            return Err(Error::ClusterUnavailable("view has no members".to_string()));
        }

        let scatter_start = Instant::now();
        let members: Vec<NodeId> = state.view.members().to_vec();
        let mut partials: Vec<(NodeId, Result<PartialResult>)> = Vec::with_capacity(members.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(members.len());
            for member in &members {
                if *member == self.node {
                    handles.push(None);
                } else {
                    let transport = Arc::clone(&self.transport);
                    let timeout = self.cfg.per_node_timeout;
                    handles.push(Some(
                        scope.spawn(move || transport.node_query(member, req, timeout)),
                    ));
                }
            }
            for (member, handle) in members.iter().zip(handles) {
                let outcome = match handle {
                    Some(h) => h.join().unwrap_or_else(|_| {
                        Err(Error::NodeUnreachable {
                            node: member.to_string(),
                            detail: "query thread panicked".to_string(),
                        })
                    }),
                    None => state.node_search(req, self.cfg.workers),
                };
                partials.push((member.clone(), outcome));
            }
        });
        let scatter_ms = ms_since(scatter_start);

        let merge_start = Instant::now();
        let mut response = SearchResponse::default();
        let mut per_category: std::collections::BTreeMap<CategoryId, Vec<Vec<Hit>>> =
            Default::default();
        let mut answered = 0usize;
        for (member, outcome) in partials {
            match outcome {
                Ok(partial) => {
                    answered += 1;
                    response.degraded |= partial.degraded;
                    response.partitions_missing += partial.partitions_missing;
                    for (category, hits) in partial.per_category {
                        per_category.entry(category).or_default().push(hits);
                    }
                }
                Err(err) => {
                    // Local scan failures are query defects; remote
                    // failures degrade the answer.
                    if member == self.node {
                        return Err(err);
                    }
                    response.degraded = true;
                    for (category, _) in &req.categories {
                        for part in 0..state.assignment.partition_count() {
                            if state.assignment.owner(*category, part) == Some(&member) {
                                response.partitions_missing += 1;
                            }
                        }
                    }
                    response.nodes_failed.push(member);
                }
            }
        }
        if answered == 0 {
            return Err(Error::ClusterUnavailable(
                "no cluster member answered the query".to_string(),
            ));
        }
        let n = req.per_category as usize;
        for (category, lists) in per_category {
            response
                .per_category
                .insert(category, merge_hit_lists(lists, n));
        }
        response.results = merge_global(&response.per_category, final_n, self.cfg.scoring.bits);
        let merge_ms = ms_since(merge_start);
        Ok((response, scatter_ms, merge_ms))
    }

    /// Full serving-node path for wire clients: fan-out plus optional
    /// re-ranking. Returns the ranked list and the degraded flag.
    pub fn serve_query(&self, req: &QueryRequest, final_n: usize) -> Result<(Vec<RankedResult>, bool)> {
        let response = self.fanout_search(req, final_n)?;
        let degraded = response.degraded;
        let mut results = response.results;
        if req.rerank {
            results = self.apply_rerank(req, results)?;
        }
        Ok((results, degraded))
    }

    fn apply_rerank(
        &self,
        req: &QueryRequest,
        results: Vec<RankedResult>,
    ) -> Result<Vec<RankedResult>> {
        if results.is_empty() {
            return Ok(results);
        }
        let predicted = self.predicted_aspects(req, &results);
        let cut = results.len().min(RERANK_CAP);
        let (head, tail) = results.split_at(cut);
        let mut out = match &self.aspects {
            Some(source) => rerank(head, &predicted, source.as_ref(), &self.cfg.scoring)?,
            None => rerank(head, &predicted, &NO_ASPECTS, &self.cfg.scoring)?,
        };
        out.extend_from_slice(tail);
        Ok(out)
    }

    /// Predicted aspects for re-ranking: the request's own predictions
    /// when present, otherwise anchor-style -- an exact-hash match at
    /// distance zero lends its stored aspects to the query.
    fn predicted_aspects(
        &self,
        req: &QueryRequest,
        results: &[RankedResult],
    ) -> Vec<(Aspect, f64)> {
        if !req.predicted_aspects.is_empty() {
            return req.predicted_aspects.clone();
        }
        let Some(source) = &self.aspects else {
            return Vec::new();
        };
        let Some(anchor) = results.first().filter(|r| r.hamming == 0) else {
            return Vec::new();
        };
        match source.aspects_for(anchor.listing_id) {
            Some(set) => set
                .iter()
                .map(|a| {
                    let w = self.cfg.aspect_weights.weight_for(&a.name);
                    (a.clone(), w)
                })
                .collect(),
            None => Vec::new(),
        }
    }
}

struct NoAspects;

impl AspectSource for NoAspects {
    fn aspects_for(&self, _: u64) -> Option<visearch_core::AspectSet> {
        None
    }
}

static NO_ASPECTS: NoAspects = NoAspects;

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Query entry point accepting either raw features (category prediction
/// included) or a precomputed signature.
#[derive(Clone, Debug)]
pub enum QueryInput {
    Features(FeatureVector),
    Signature(BinarySignature),
}

#[derive(Clone, Debug)]
pub struct QueryOptions {
    pub request_id: u64,
    /// Category prediction truncation for feature queries.
    pub mode: PredictMode,
    /// Per-category fetch size (M).
    pub per_category: u32,
    /// Final merged result count (N).
    pub final_n: usize,
    pub rerank: bool,
    pub predicted_aspects: Vec<(Aspect, f64)>,
    /// Explicit category restriction; signature queries without one scan
    /// every category known to the assignment.
    pub categories: Option<Vec<CategoryId>>,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions {
            request_id: 0,
            mode: PredictMode::AbsoluteTopN(5),
            per_category: 50,
            final_n: 50,
            rerank: false,
            predicted_aspects: Vec::new(),
            categories: None,
        }
    }
}

/// Wall-clock milliseconds per pipeline stage.
#[derive(Clone, Copy, Debug, Default)]
pub struct StageTimings {
    pub predict_ms: f64,
    pub fanout_ms: f64,
    pub merge_ms: f64,
    pub rerank_ms: f64,
    pub total_ms: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.predict_ms + self.fanout_ms + self.merge_ms + self.rerank_ms
    }
}

#[derive(Clone, Debug)]
pub struct QueryOutcome {
    pub results: Vec<RankedResult>,
    pub degraded: bool,
    /// Categories the query was restricted to, with confidences.
    pub categories: Vec<(CategoryId, f64)>,
    pub timings: StageTimings,
}

/// Single-pass query flow: predict categories and hash (when given
/// features), fan out with per-category fetch size M, merge, re-rank,
/// and account per-stage latency.
pub fn end_to_end_query(
    engine: &SearchEngine,
    model: Option<&CategoryModel>,
    projector: Option<&HashProjector>,
    input: QueryInput,
    opts: &QueryOptions,
) -> Result<QueryOutcome> {
    let total_start = Instant::now();

    let predict_start = Instant::now();
    let (signature, categories) = match input {
        QueryInput::Features(features) => {
            let projector = projector
                .ok_or_else(|| Error::Config("feature queries need a projector".to_string()))?;
            let model = model
                .ok_or_else(|| Error::Config("feature queries need a category model".to_string()))?;
            let signature = projector.extract_hash(&features)?;
            let categories = match &opts.categories {
                Some(cats) => cats.iter().map(|c| (*c, 0.0)).collect(),
                None => model.predict(&features, opts.mode)?.ranked,
            };
            (signature, categories)
        }
        QueryInput::Signature(signature) => {
            let categories: Vec<(CategoryId, f64)> = match &opts.categories {
                Some(cats) => cats.iter().map(|c| (*c, 0.0)).collect(),
                None => engine
                    .snapshot()
                    .assignment
                    .categories()
                    .into_iter()
                    .map(|c| (c, 0.0))
                    .collect(),
            };
            (signature, categories)
        }
    };
    let predict_ms = ms_since(predict_start);

    let req = QueryRequest {
        request_id: opts.request_id,
        signature,
        categories: categories.clone(),
        per_category: opts.per_category,
        predicted_aspects: opts.predicted_aspects.clone(),
        rerank: opts.rerank,
    };
    let (response, fanout_ms, merge_ms) = engine.fanout_search_timed(&req, opts.final_n)?;

    let rerank_start = Instant::now();
    let results = if opts.rerank {
        engine.apply_rerank(&req, response.results)?
    } else {
        response.results
    };
    let rerank_ms = ms_since(rerank_start);

    Ok(QueryOutcome {
        results,
        degraded: response.degraded,
        categories,
        timings: StageTimings {
            predict_ms,
            fanout_ms,
            merge_ms,
            rerank_ms,
            total_ms: ms_since(total_start),
        },
    })
}
