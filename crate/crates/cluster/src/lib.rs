//! Cluster membership and deterministic data placement: every node
//! independently derives the same category-partition-to-node assignment
//! from the current member set, and redistribution plans are plain diffs
//! of two assignments.

pub mod assign;
pub mod discovery;
pub mod error;
pub mod membership;
pub mod net;
pub mod ring;
pub mod view;
pub mod wire;

pub use assign::{compute_assignment, redistribution_plan, Assignment, RedistributionPlan};
pub use error::{Error, Result};
pub use membership::{MembershipConfig, MembershipState};
pub use ring::KetamaRing;
pub use view::{ClusterView, NodeId};
