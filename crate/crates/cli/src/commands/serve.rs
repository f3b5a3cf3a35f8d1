//! `visearch serve`: a long-running cluster node. Joins the membership
//! ring via TCP heartbeats and the static member list, loads the
//! partitions the deterministic assignment gives it, serves the query
//! wire protocol, and redistributes on every view change.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;

use visearch_cluster::discovery::{Discovery, FileDiscovery};
use visearch_cluster::membership::MembershipConfig;
use visearch_cluster::net::{MembershipRuntime, NetConfig};
use visearch_cluster::NodeId;
use visearch_core::ingest::HashStore;
use visearch_ranker::server::{QueryServer, TcpTransport};
use visearch_ranker::{AspectSource, IndexDirLoader, NodeState, PartitionLoader, SearchEngine};

use crate::config::Config;

#[derive(Args)]
pub struct ServeArgs {
    /// This node's id; must appear in the members file.
    #[arg(long)]
    node_id: String,

    /// Model version whose index files to serve (defaults to config).
    #[arg(long)]
    version: Option<u32>,

    /// Store snapshot used as the aspect catalog for re-ranking.
    #[arg(long)]
    store: Option<PathBuf>,

    /// Exit after this many seconds (for scripted runs).
    #[arg(long)]
    run_secs: Option<u64>,
}

pub fn run(config: &Config, args: ServeArgs) -> anyhow::Result<()> {
    let node = NodeId::new(args.node_id.clone());
    let members_path = config
        .members_path()
        .context("cluster.members_file must be set to serve")?;
    let discovery = FileDiscovery::new(&members_path);
    let records = discovery
        .poll()
        .with_context(|| format!("cannot read members file {}", members_path.display()))?;
    let me = records
        .iter()
        .find(|r| r.node == node)
        .with_context(|| format!("node {node} not present in {}", members_path.display()))?
        .clone();
    let query_addr = std::env::var(crate::config::QUERY_ADDR_ENV).unwrap_or(me.query_addr);
    let member_addr = std::env::var(crate::config::MEMBER_ADDR_ENV).unwrap_or(me.member_addr);

    let version = args.version.unwrap_or(config.file.model.version);
    let loader = IndexDirLoader::new(config.index_root(), version);
    let categories = loader.categories().with_context(|| {
        format!(
            "no index files for version {version} under {}",
            config.index_root().display()
        )
    })?;
    if categories.is_empty() {
        bail!("no categories to serve; run `visearch extract` first");
    }

    let membership = MembershipConfig {
        heartbeat_interval_ms: config.file.cluster.heartbeat_ms,
        missed_threshold: config.file.cluster.missed_heartbeats,
    };
    let runtime = Arc::new(
        MembershipRuntime::start(
            NetConfig {
                node: node.clone(),
                bind_addr: member_addr.clone(),
                membership,
            },
            Arc::new(discovery),
        )
        .context("cannot start membership runtime")?,
    );

    let transport = {
        let runtime = Arc::clone(&runtime);
        TcpTransport::new(move |peer: &NodeId| runtime.query_addr(peer))
    };

    let store_path = args.store.unwrap_or_else(|| config.store_path());
    let aspects: Option<Arc<dyn AspectSource>> = if store_path.exists() {
        let store = HashStore::load_from_path(&store_path)?;
        println!(
            "aspect catalog: {} live listings from {}",
            store.live_listing_count(),
            store_path.display()
        );
        Some(Arc::new(store))
    } else {
        None
    };

    let view = runtime.view();
    let state = NodeState::build(node.clone(), view.clone(), &categories, &loader)?;
    println!(
        "node {node}: epoch {} with {} members, {} partitions over {} categories",
        view.epoch(),
        view.len(),
        state.partitions.len(),
        categories.len()
    );
    let engine = Arc::new(SearchEngine::new(
        config.search_config()?,
        state,
        Arc::new(transport),
        aspects,
    ));
    let server = QueryServer::start(Arc::clone(&engine), &query_addr)?;
    println!("node {node}: serving queries on {}", server.local_addr());

    let started = Instant::now();
    let poll = Duration::from_millis(config.file.cluster.heartbeat_ms.max(20) / 2);
    loop {
        std::thread::sleep(poll);
        for warning in runtime.take_warnings() {
            eprintln!("node {node}: {warning}");
        }
        let view = runtime.view();
        if view.members() != engine.snapshot().view.members() {
            let plan = engine.apply_view(view.clone(), &categories, &loader)?;
            println!(
                "node {node}: epoch {} with {} members; redistribution: load {} drop {} partitions",
                view.epoch(),
                view.len(),
                plan.load.len(),
                plan.drop.len()
            );
        }
        if let Some(limit) = args.run_secs {
            if started.elapsed() >= Duration::from_secs(limit) {
                println!("node {node}: run time limit reached, shutting down");
                server.shutdown();
                return Ok(());
            }
        }
    }
}
