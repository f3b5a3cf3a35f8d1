//! Two-node loopback membership: nodes discover each other through a
//! static list, converge to a shared view, and drop a peer after it
//! stops heartbeating.

use std::sync::Arc;
use std::time::{Duration, Instant};

use visearch_cluster::discovery::{MemberRecord, StaticDiscovery};
use visearch_cluster::membership::MembershipConfig;
use visearch_cluster::net::{MembershipRuntime, NetConfig};
use visearch_cluster::view::NodeId;

fn free_addr() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.local_addr().unwrap().to_string()
}

fn wait_for(deadline: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let start = Instant::now();
    while start.elapsed() < deadline {
        if cond() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    false
}

#[test]
fn two_nodes_converge_then_detect_failure() {
    let addr_a = free_addr();
    let addr_b = free_addr();
    let records = vec![
        MemberRecord {
            node: NodeId::from("a"),
            query_addr: "127.0.0.1:1".to_string(),
            member_addr: addr_a.clone(),
        },
        MemberRecord {
            node: NodeId::from("b"),
            query_addr: "127.0.0.1:2".to_string(),
            member_addr: addr_b.clone(),
        },
    ];
    let membership = MembershipConfig {
        heartbeat_interval_ms: 50,
        missed_threshold: 3,
    };

    let node_a = MembershipRuntime::start(
        NetConfig {
            node: NodeId::from("a"),
            bind_addr: addr_a,
            membership,
        },
        Arc::new(StaticDiscovery::new(records.clone())),
    )
    .unwrap();
    let node_b = MembershipRuntime::start(
        NetConfig {
            node: NodeId::from("b"),
            bind_addr: addr_b,
            membership,
        },
        Arc::new(StaticDiscovery::new(records)),
    )
    .unwrap();

    assert!(
        wait_for(Duration::from_secs(5), || {
            node_a.view().len() == 2 && node_b.view().len() == 2
        }),
        "nodes never converged: a={:?} b={:?}",
        node_a.view(),
        node_b.view()
    );
    assert_eq!(node_a.view().members(), node_b.view().members());
    assert_eq!(node_a.query_addr(&NodeId::from("b")).unwrap(), "127.0.0.1:2");

    node_b.shutdown();
    assert!(
        wait_for(Duration::from_secs(5), || node_a.view().len() == 1),
        "node a never dropped b: {:?}",
        node_a.view()
    );
}
