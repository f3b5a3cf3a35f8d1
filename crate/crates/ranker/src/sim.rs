//! In-process cluster harness: every node is a [`SearchEngine`] behind a
//! shared registry transport with a kill switch. Topology changes and
//! node failures become deterministic, which the exactness and
//! fault-tolerance tests rely on.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use visearch_cluster::{ClusterView, NodeId, RedistributionPlan};
use visearch_core::CategoryId;

use crate::error::{Error, Result};
use crate::node::{NodeState, PartitionLoader};
use crate::query::{PartialResult, QueryRequest};
use crate::rerank::AspectSource;
use crate::service::{NodeTransport, SearchConfig, SearchEngine};

#[derive(Default)]
struct Registry {
    engines: RwLock<BTreeMap<NodeId, Arc<SearchEngine>>>,
    dead: RwLock<BTreeSet<NodeId>>,
}

impl NodeTransport for Registry {
    fn node_query(
        &self,
        node: &NodeId,
        req: &QueryRequest,
        _timeout: Duration,
    ) -> Result<PartialResult> {
        if self.dead.read().unwrap().contains(node) {
            return Err(Error::NodeUnreachable {
                node: node.to_string(),
                detail: "node killed".to_string(),
            });
        }
        let engine = self
            .engines
            .read()
            .unwrap()
            .get(node)
            .cloned()
            .ok_or_else(|| Error::NodeUnreachable {
                node: node.to_string(),
                detail: "unknown node".to_string(),
            })?;
        engine.node_search(req)
    }
}

pub struct LocalCluster {
    registry: Arc<Registry>,
    engines: BTreeMap<NodeId, Arc<SearchEngine>>,
    epoch: u64,
}

impl LocalCluster {
    /// Builds a cluster over `node_ids`; every node loads its assigned
    /// partitions from `loader` under the initial full view.
    pub fn new(
        node_ids: &[&str],
        categories: &[CategoryId],
        loader: &dyn PartitionLoader,
        cfg: SearchConfig,
        aspects: Option<Arc<dyn AspectSource>>,
    ) -> Result<Self> {
        let registry = Arc::new(Registry::default());
        let members: Vec<NodeId> = node_ids.iter().map(|s| NodeId::from(*s)).collect();
        let view = ClusterView::new(members.clone(), 1);
        let mut engines = BTreeMap::new();
        for node in members {
            let state = NodeState::build(node.clone(), view.clone(), categories, loader)?;
            let engine = Arc::new(SearchEngine::new(
                cfg.clone(),
                state,
                Arc::clone(&registry) as Arc<dyn NodeTransport>,
                aspects.clone(),
            ));
            registry
                .engines
                .write()
                .unwrap()
                .insert(node.clone(), Arc::clone(&engine));
            engines.insert(node, engine);
        }
        Ok(LocalCluster {
            registry,
            engines,
            epoch: 1,
        })
    }

    pub fn engine(&self, id: &str) -> Arc<SearchEngine> {
        Arc::clone(&self.engines[&NodeId::from(id)])
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.engines.keys().cloned().collect()
    }

    /// Makes a node unreachable; its engine keeps its state so queries
    /// in flight against old snapshots stay deterministic.
    pub fn kill(&self, id: &str) {
        self.registry
            .dead
            .write()
            .unwrap()
            .insert(NodeId::from(id));
    }

    pub fn revive(&self, id: &str) {
        self.registry.dead.write().unwrap().remove(&NodeId::from(id));
    }

    /// Drives a membership change on every surviving member, returning
    /// each node's redistribution plan.
    pub fn apply_view(
        &mut self,
        member_ids: &[&str],
        categories: &[CategoryId],
        loader: &dyn PartitionLoader,
    ) -> Result<Vec<(NodeId, RedistributionPlan)>> {
        self.epoch += 1;
        let members: Vec<NodeId> = member_ids.iter().map(|s| NodeId::from(*s)).collect();
        let view = ClusterView::new(members.clone(), self.epoch);
        let mut plans = Vec::new();
        for node in &members {
            let engine = self
                .engines
                .get(node)
                .ok_or_else(|| Error::invalid(format!("unknown node {node}")))?;
            let plan = engine.apply_view(view.clone(), categories, loader)?;
            plans.push((node.clone(), plan));
        }
        Ok(plans)
    }
}
