//! Deterministic membership state machine. Heartbeats, discovery results
//! and clock ticks are fed in explicitly (as milliseconds on an abstract
//! clock), so tests can script fault schedules and the TCP runtime just
//! forwards real events.

use std::collections::BTreeMap;

use crate::view::{ClusterView, NodeId};

#[derive(Clone, Copy, Debug)]
pub struct MembershipConfig {
    pub heartbeat_interval_ms: u64,
    /// A member is dropped after this many consecutive missed heartbeats.
    pub missed_threshold: u32,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        MembershipConfig {
            heartbeat_interval_ms: 1000,
            missed_threshold: 3,
        }
    }
}

#[derive(Debug)]
pub struct MembershipState {
    self_id: NodeId,
    cfg: MembershipConfig,
    last_heard: BTreeMap<NodeId, u64>,
    view: ClusterView,
}

impl MembershipState {
    pub fn new(self_id: NodeId, cfg: MembershipConfig) -> Self {
        let view = ClusterView::new(vec![self_id.clone()], 1);
        MembershipState {
            self_id,
            cfg,
            last_heard: BTreeMap::new(),
            view,
        }
    }

    pub fn self_id(&self) -> &NodeId {
        &self.self_id
    }

    pub fn view(&self) -> &ClusterView {
        &self.view
    }

    /// Records a heartbeat; returns the new view if membership changed.
    pub fn on_heartbeat(&mut self, from: &NodeId, now_ms: u64) -> Option<ClusterView> {
        if *from == self.self_id {
            return None;
        }
        self.last_heard.insert(from.clone(), now_ms);
        self.rebuild()
    }

    /// Merges a discovery result. Known members keep their heartbeat
    /// clock; newly discovered members get a grace period starting now.
    pub fn on_discovery(&mut self, nodes: &[NodeId], now_ms: u64) -> Option<ClusterView> {
        for node in nodes {
            if *node != self.self_id {
                self.last_heard.entry(node.clone()).or_insert(now_ms);
            }
        }
        self.rebuild()
    }

    /// Expires members whose last heartbeat is older than
    /// `missed_threshold * heartbeat_interval`.
    pub fn tick(&mut self, now_ms: u64) -> Option<ClusterView> {
        let deadline = u64::from(self.cfg.missed_threshold) * self.cfg.heartbeat_interval_ms;
        self.last_heard
            .retain(|_, heard| now_ms.saturating_sub(*heard) <= deadline);
        self.rebuild()
    }

    /// Merges one discovery poll and applies health expiry; a failed
    /// poll retains the current view and reports a warning.
    pub fn resolve_members(
        &mut self,
        discovered: Result<Vec<NodeId>, String>,
        now_ms: u64,
    ) -> (ClusterView, Option<String>) {
        match discovered {
            Ok(nodes) => {
                self.on_discovery(&nodes, now_ms);
                self.tick(now_ms);
                (self.view.clone(), None)
            }
            Err(e) => (
                self.view.clone(),
                Some(format!("discovery unreachable, retaining view: {e}")),
            ),
        }
    }

    fn rebuild(&mut self) -> Option<ClusterView> {
        let mut members: Vec<NodeId> = self.last_heard.keys().cloned().collect();
        members.push(self.self_id.clone());
        let next = ClusterView::new(members, self.view.epoch() + 1);
        if next.members() == self.view.members() {
            return None;
        }
        self.view = next;
        Some(self.view.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> MembershipState {
        MembershipState::new(
            NodeId::from("a"),
            MembershipConfig {
                heartbeat_interval_ms: 1000,
                missed_threshold: 3,
            },
        )
    }

    #[test]
    fn starts_alone_at_epoch_one() {
        let s = state();
        assert_eq!(s.view().members(), &[NodeId::from("a")]);
        assert_eq!(s.view().epoch(), 1);
    }

    #[test]
    fn discovery_of_current_set_is_no_change() {
        let mut s = state();
        s.on_heartbeat(&NodeId::from("b"), 0).unwrap();
        let epoch = s.view().epoch();
        assert!(s
            .on_discovery(&[NodeId::from("a"), NodeId::from("b")], 10)
            .is_none());
        assert_eq!(s.view().epoch(), epoch);
    }

    #[test]
    fn discovery_superset_bumps_epoch() {
        let mut s = state();
        let view = s
            .on_discovery(&[NodeId::from("b"), NodeId::from("c")], 0)
            .unwrap();
        assert_eq!(view.len(), 3);
        assert_eq!(view.epoch(), 2);
    }

    #[test]
    fn member_dropped_after_three_missed_heartbeats() {
        let mut s = state();
        s.on_heartbeat(&NodeId::from("b"), 0);
        assert!(s.tick(3000).is_none(), "exactly at deadline still alive");
        let view = s.tick(3001).unwrap();
        assert_eq!(view.members(), &[NodeId::from("a")]);
    }

    #[test]
    fn heartbeats_keep_member_alive() {
        let mut s = state();
        s.on_heartbeat(&NodeId::from("b"), 0);
        for t in [1000u64, 2000, 3000, 4000] {
            s.on_heartbeat(&NodeId::from("b"), t);
            assert!(s.tick(t + 500).is_none());
        }
        assert_eq!(s.view().len(), 2);
    }

    #[test]
    fn flapping_member_bumps_epoch_exactly_three_times() {
        // Scripted schedule: join, expire, rejoin.
        let mut s = state();
        let start = s.view().epoch();
        s.on_heartbeat(&NodeId::from("b"), 0); // join
        s.tick(1000);
        s.tick(2000);
        s.tick(3500); // leave: 3 intervals missed
        s.on_heartbeat(&NodeId::from("b"), 3600); // rejoin
        assert_eq!(s.view().epoch(), start + 3);
        assert_eq!(s.view().len(), 2);
    }

    #[test]
    fn failed_discovery_retains_view_with_warning() {
        let mut s = state();
        s.on_heartbeat(&NodeId::from("b"), 0);
        let before = s.view().clone();
        let (view, warning) = s.resolve_members(Err("dns down".to_string()), 100);
        assert_eq!(view, before);
        assert!(warning.unwrap().contains("retaining view"));
    }

    #[test]
    fn resolve_members_merges_and_expires() {
        let mut s = state();
        s.on_heartbeat(&NodeId::from("stale"), 0);
        let (view, warning) = s.resolve_members(Ok(vec![NodeId::from("c")]), 10_000);
        assert!(warning.is_none());
        // "stale" expired, "c" admitted on grace.
        assert_eq!(view.members(), &[NodeId::from("a"), NodeId::from("c")]);
    }

    #[test]
    fn self_heartbeat_ignored() {
        let mut s = state();
        assert!(s.on_heartbeat(&NodeId::from("a"), 5).is_none());
        assert_eq!(s.view().len(), 1);
    }
}
