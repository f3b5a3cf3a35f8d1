//! Node identity and the membership view every node derives placement
//! from.

use std::fmt;

/// Opaque node identifier, stable for the process lifetime.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Sorted, duplicate-free member list plus a per-node epoch counter that
/// increases on every membership change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterView {
    members: Vec<NodeId>,
    epoch: u64,
}

impl ClusterView {
    pub fn new(mut members: Vec<NodeId>, epoch: u64) -> Self {
        members.sort();
        members.dedup();
        ClusterView { members, epoch }
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.members.binary_search(node).is_ok()
    }

    /// Position of `node` in the sorted member list.
    pub fn position(&self, node: &NodeId) -> Option<usize> {
        self.members.binary_search(node).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn members_sorted_and_deduplicated() {
        let view = ClusterView::new(
            vec![NodeId::from("c"), NodeId::from("a"), NodeId::from("c")],
            1,
        );
        assert_eq!(view.members(), &[NodeId::from("a"), NodeId::from("c")]);
        assert_eq!(view.position(&NodeId::from("c")), Some(1));
        assert!(!view.contains(&NodeId::from("b")));
    }
}
