//! Ketama consistent-hash ring. Ring positions are the first 8 bytes,
//! little-endian, of `MD5("<node_id>-<replica_index>")` with 160 virtual
//! points per node; category keys hash the decimal rendering of the
//! category id the same way. Every node derives an identical ring from
//! the same member list.

use md5::{Digest, Md5};

use crate::view::NodeId;

pub const DEFAULT_VIRTUAL_POINTS: u32 = 160;

#[derive(Clone, Debug)]
pub struct KetamaRing {
    points: Vec<(u64, NodeId)>,
}

impl KetamaRing {
    pub fn build(members: &[NodeId], virtual_points: u32) -> Self {
        let mut points = Vec::with_capacity(members.len() * virtual_points as usize);
        for node in members {
            for replica in 0..virtual_points {
                points.push((digest_position(&format!("{node}-{replica}")), node.clone()));
            }
        }
        points.sort();
        KetamaRing { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Owner of the first ring point at or after `position`, wrapping to
    /// the lowest point.
    pub fn owner(&self, position: u64) -> Option<&NodeId> {
        if self.points.is_empty() {
            return None;
        }
        let idx = self
            .points
            .partition_point(|(p, _)| *p < position);
        let idx = if idx == self.points.len() { 0 } else { idx };
        Some(&self.points[idx].1)
    }

    pub fn owner_for_category(&self, category_id: u32) -> Option<&NodeId> {
        self.owner(category_position(category_id))
    }
}

/// First 8 bytes of the MD5 digest, little-endian.
pub fn digest_position(key: &str) -> u64 {
    let digest = Md5::digest(key.as_bytes());
    u64::from_le_bytes(digest[0..8].try_into().unwrap())
}

pub fn category_position(category_id: u32) -> u64 {
    digest_position(&category_id.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nodes(ids: &[&str]) -> Vec<NodeId> {
        ids.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn ring_has_virtual_points_per_member() {
        let ring = KetamaRing::build(&nodes(&["a", "b", "c"]), 160);
        assert_eq!(ring.len(), 480);
    }

    #[test]
    fn ring_is_deterministic() {
        let a = KetamaRing::build(&nodes(&["a", "b"]), 160);
        let b = KetamaRing::build(&nodes(&["b", "a"]), 160);
        for cat in 0..100u32 {
            assert_eq!(a.owner_for_category(cat), b.owner_for_category(cat));
        }
    }

    #[test]
    fn owner_wraps_past_highest_point() {
        let ring = KetamaRing::build(&nodes(&["a"]), 4);
        assert_eq!(ring.owner(u64::MAX), ring.owner(0));
        assert!(KetamaRing::build(&[], 4).owner(7).is_none());
    }

    #[test]
    fn single_member_owns_all_keys() {
        let ring = KetamaRing::build(&nodes(&["only"]), 160);
        for cat in 0..50u32 {
            assert_eq!(ring.owner_for_category(cat).unwrap().as_str(), "only");
        }
    }
}
