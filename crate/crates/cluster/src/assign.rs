//! Deterministic data placement: each category is split into one
//! partition per cluster member, partitions are handed out round-robin
//! through the sorted member list, and the starting member is the
//! Ketama ring owner of the category key. Any node holding the same view
//! computes a bytewise-identical assignment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ring::{category_position, KetamaRing, DEFAULT_VIRTUAL_POINTS};
use crate::view::{ClusterView, NodeId};

pub type CategoryId = u32;

/// `(category, partition_index)` to owner map for one view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    map: BTreeMap<(CategoryId, u32), NodeId>,
    members: Vec<NodeId>,
    epoch: u64,
}

impl Assignment {
    pub fn owner(&self, category: CategoryId, partition: u32) -> Option<&NodeId> {
        self.map.get(&(category, partition))
    }

    /// Partitions per category (one per member).
    pub fn partition_count(&self) -> u32 {
        self.members.len() as u32
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(CategoryId, u32), &NodeId)> {
        self.map.iter()
    }

    /// Distinct categories covered by this assignment, ascending.
    pub fn categories(&self) -> Vec<CategoryId> {
        let mut cats: Vec<CategoryId> = self.map.keys().map(|(c, _)| *c).collect();
        cats.dedup();
        cats
    }

    /// Partitions owned by `node`, in (category, partition) order.
    pub fn partitions_for(&self, node: &NodeId) -> Vec<(CategoryId, u32)> {
        self.map
            .iter()
            .filter(|(_, owner)| *owner == node)
            .map(|(k, _)| *k)
            .collect()
    }

    /// Canonical byte encoding used to compare assignments across nodes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.members.len() as u32).to_le_bytes());
        for ((cat, part), node) in &self.map {
            out.extend_from_slice(&cat.to_le_bytes());
            out.extend_from_slice(&part.to_le_bytes());
            let bytes = node.as_str().as_bytes();
            out.extend_from_slice(&(bytes.len() as u16).to_le_bytes());
            out.extend_from_slice(bytes);
        }
        out
    }
}

/// Computes the full placement for `categories` under `view`.
pub fn compute_assignment(view: &ClusterView, categories: &[CategoryId]) -> Result<Assignment> {
    compute_assignment_with(view, categories, DEFAULT_VIRTUAL_POINTS)
}

pub fn compute_assignment_with(
    view: &ClusterView,
    categories: &[CategoryId],
    virtual_points: u32,
) -> Result<Assignment> {
    if view.is_empty() {
        return Err(Error::Unavailable("no live members in view".to_string()));
    }
    let members = view.members();
    let ring = KetamaRing::build(members, virtual_points);
    let n = members.len() as u32;
    let mut map = BTreeMap::new();
    for cat in categories {
        let owner = ring
            .owner(category_position(*cat))
            .expect("nonempty ring");
        let start = view
            .position(owner)
            .expect("ring owner is a view member") as u32;
        for p in 0..n {
            map.insert((*cat, p), members[((start + p) % n) as usize].clone());
        }
    }
    Ok(Assignment {
        map,
        members: members.to_vec(),
        epoch: view.epoch(),
    })
}

/// What one node must load and drop when the view changes. Partition
/// identity includes the member count: when the cluster resizes, every
/// category is re-split, so all slices are reloaded under the new split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RedistributionPlan {
    pub load: Vec<(CategoryId, u32)>,
    pub drop: Vec<(CategoryId, u32)>,
}

impl RedistributionPlan {
    pub fn is_empty(&self) -> bool {
        self.load.is_empty() && self.drop.is_empty()
    }
}

/// Diff of two assignments restricted to `node`.
pub fn redistribution_plan(
    old: &Assignment,
    new: &Assignment,
    node: &NodeId,
) -> RedistributionPlan {
    let same_split = old.partition_count() == new.partition_count();
    let old_owned = old.partitions_for(node);
    let new_owned = new.partitions_for(node);
    if !same_split {
        return RedistributionPlan {
            load: new_owned,
            drop: old_owned,
        };
    }
    let load = new_owned
        .iter()
        .filter(|p| !old_owned.contains(p))
        .copied()
        .collect();
    let drop = old_owned
        .iter()
        .filter(|p| !new_owned.contains(p))
        .copied()
        .collect();
    RedistributionPlan { load, drop }
}
