//! Per-node state: the partitions a node holds under the current view,
//! how they are loaded from the shared read-only index files, and the
//! local search over them.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use visearch_cluster::assign::{compute_assignment, redistribution_plan, Assignment, RedistributionPlan};
use visearch_cluster::{ClusterView, NodeId};
use visearch_core::index::{index_path, read_index, split_partition};
use visearch_core::{CategoryId, CategoryPartition};

use crate::error::{Error, Result};
use crate::merge::merge_hit_lists;
use crate::query::{PartialResult, QueryRequest};
use crate::scan::scan_partition_workers;

/// Source of partition slices. Implementations read the shared extract
/// files (or an in-memory equivalent) and hand out the requested
/// contiguous slice of a category.
pub trait PartitionLoader: Send + Sync {
    fn load(
        &self,
        category: CategoryId,
        partition_index: u32,
        partition_count: u32,
    ) -> Result<CategoryPartition>;

    /// All categories available from this source, ascending.
    fn categories(&self) -> Result<Vec<CategoryId>>;
}

/// Loads partitions from `<root>/<model_version>/<category_id>.idx`.
pub struct IndexDirLoader {
    root: PathBuf,
    model_version: u32,
}

impl IndexDirLoader {
    pub fn new(root: impl Into<PathBuf>, model_version: u32) -> Self {
        IndexDirLoader {
            root: root.into(),
            model_version,
        }
    }
}

impl PartitionLoader for IndexDirLoader {
    fn load(
        &self,
        category: CategoryId,
        partition_index: u32,
        partition_count: u32,
    ) -> Result<CategoryPartition> {
        let path = index_path(&self.root, self.model_version, category);
        let (_, full) = read_index(&path)?;
        let mut parts = split_partition(&full, partition_count as usize)?;
        if partition_index as usize >= parts.len() {
            return Err(Error::invalid(format!(
                "partition {partition_index} out of range for {partition_count} pieces"
            )));
        }
        Ok(parts.swap_remove(partition_index as usize))
    }

    fn categories(&self) -> Result<Vec<CategoryId>> {
        let dir = self.root.join(self.model_version.to_string());
        let mut cats = Vec::new();
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("idx") {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if let Ok(cat) = stem.parse::<u32>() {
                    cats.push(cat);
                }
            }
        }
        cats.sort_unstable();
        Ok(cats)
    }
}

/// In-memory loader over whole-category partitions; used by tests and
/// the benchmark harness.
pub struct InMemoryLoader {
    full: BTreeMap<CategoryId, Arc<CategoryPartition>>,
}

impl InMemoryLoader {
    pub fn new(full: BTreeMap<CategoryId, Arc<CategoryPartition>>) -> Self {
        InMemoryLoader { full }
    }
}

impl PartitionLoader for InMemoryLoader {
    fn load(
        &self,
        category: CategoryId,
        partition_index: u32,
        partition_count: u32,
    ) -> Result<CategoryPartition> {
        let full = self
            .full
            .get(&category)
            .ok_or_else(|| Error::invalid(format!("unknown category {category}")))?;
        let mut parts = split_partition(full, partition_count as usize)?;
        Ok(parts.swap_remove(partition_index as usize))
    }

    fn categories(&self) -> Result<Vec<CategoryId>> {
        Ok(self.full.keys().copied().collect())
    }
}

/// Immutable snapshot of what one node serves. Queries hold the snapshot
/// they started with; view changes swap in a fresh one.
#[derive(Clone)]
pub struct NodeState {
    pub node: NodeId,
    pub view: ClusterView,
    pub assignment: Assignment,
    pub partitions: BTreeMap<(CategoryId, u32), Arc<CategoryPartition>>,
}

impl NodeState {
    /// Builds the node's state for `view`, loading every partition the
    /// assignment gives this node.
    pub fn build(
        node: NodeId,
        view: ClusterView,
        categories: &[CategoryId],
        loader: &dyn PartitionLoader,
    ) -> Result<Self> {
        let assignment = compute_assignment(&view, categories)?;
        let mut partitions = BTreeMap::new();
        let count = assignment.partition_count();
        for (category, part) in assignment.partitions_for(&node) {
            partitions.insert(
                (category, part),
                Arc::new(loader.load(category, part, count)?),
            );
        }
        Ok(NodeState {
            node,
            view,
            assignment,
            partitions,
        })
    }

    /// Applies a membership change: computes the redistribution plan for
    /// this node, drops released partitions, loads gained ones, and
    /// returns the successor state.
    pub fn apply_view(
        &self,
        view: ClusterView,
        categories: &[CategoryId],
        loader: &dyn PartitionLoader,
    ) -> Result<(NodeState, RedistributionPlan)> {
        let assignment = compute_assignment(&view, categories)?;
        let plan = redistribution_plan(&self.assignment, &assignment, &self.node);
        let mut partitions = self.partitions.clone();
        let same_split = self.assignment.partition_count() == assignment.partition_count();
        if !same_split {
            partitions.clear();
        }
        for key in &plan.drop {
            partitions.remove(key);
        }
        let count = assignment.partition_count();
        for (category, part) in &plan.load {
            partitions.insert(
                (*category, *part),
                Arc::new(loader.load(*category, *part, count)?),
            );
        }
        Ok((
            NodeState {
                node: self.node.clone(),
                view,
                assignment,
                partitions,
            },
            plan,
        ))
    }

    /// Scans every held partition of every requested category, split
    /// into `workers` sub-partitions each, and merges per category.
    /// Categories this node does not hold are omitted; assigned
    /// partitions that are not loaded yet count as missing.
    pub fn node_search(&self, req: &QueryRequest, workers: usize) -> Result<PartialResult> {
        req.validate()?;
        let mut result = PartialResult::default();
        let n = req.per_category as usize;
        for (category, _) in &req.categories {
            let mut assigned_here = 0u32;
            for part in 0..self.assignment.partition_count() {
                if self.assignment.owner(*category, part) == Some(&self.node) {
                    assigned_here += 1;
                }
            }
            let held: Vec<&Arc<CategoryPartition>> = self
                .partitions
                .range((*category, 0)..=(*category, u32::MAX))
                .map(|(_, p)| p)
                .collect();
            if assigned_here > held.len() as u32 {
                result.partitions_missing += assigned_here - held.len() as u32;
            }
            if held.is_empty() {
                continue;
            }
            let mut lists = Vec::with_capacity(held.len());
            for partition in held {
                lists.push(scan_partition_workers(
                    partition,
                    &req.signature,
                    n,
                    workers,
                )?);
                result.partitions_scanned += 1;
            }
            result
                .per_category
                .insert(*category, merge_hit_lists(lists, n));
        }
        result.degraded = result.partitions_missing > 0;
        Ok(result)
    }
}
