//! TCP membership runtime: a listener ingesting heartbeat frames and a
//! ticker that sends heartbeats to every discovered peer, polls the
//! discovery source and applies health expiry. All state transitions go
//! through [`MembershipState`], which tests drive directly.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::discovery::{Discovery, MemberRecord};
use crate::error::Result;
use crate::membership::{MembershipConfig, MembershipState};
use crate::view::{ClusterView, NodeId};
use crate::wire::{self, MembershipMessage, MAX_FRAME_LEN};

#[derive(Clone, Debug)]
pub struct NetConfig {
    pub node: NodeId,
    /// Membership listener bind address, e.g. "127.0.0.1:7100".
    pub bind_addr: String,
    pub membership: MembershipConfig,
}

pub struct MembershipRuntime {
    state: Arc<Mutex<MembershipState>>,
    peers: Arc<Mutex<BTreeMap<NodeId, MemberRecord>>>,
    warnings: Arc<Mutex<Vec<String>>>,
    shutdown: Arc<AtomicBool>,
    local_addr: String,
    handles: Vec<JoinHandle<()>>,
}

impl MembershipRuntime {
    pub fn start(cfg: NetConfig, discovery: Arc<dyn Discovery>) -> Result<Self> {
        let listener = TcpListener::bind(&cfg.bind_addr)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?.to_string();

        let state = Arc::new(Mutex::new(MembershipState::new(
            cfg.node.clone(),
            cfg.membership,
        )));
        let peers: Arc<Mutex<BTreeMap<NodeId, MemberRecord>>> =
            Arc::new(Mutex::new(BTreeMap::new()));
        let warnings = Arc::new(Mutex::new(Vec::new()));
        let shutdown = Arc::new(AtomicBool::new(false));
        let start = Instant::now();
        let now_ms = move || start.elapsed().as_millis() as u64;

        let accept_state = Arc::clone(&state);
        let accept_stop = Arc::clone(&shutdown);
        let accept_now = now_ms.clone();
        let accept_handle = std::thread::spawn(move || {
            while !accept_stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let _ = handle_heartbeat_conn(stream, &accept_state, accept_now());
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(_) => std::thread::sleep(Duration::from_millis(10)),
                }
            }
        });

        let tick_state = Arc::clone(&state);
        let tick_peers = Arc::clone(&peers);
        let tick_warnings = Arc::clone(&warnings);
        let tick_stop = Arc::clone(&shutdown);
        let tick_node = cfg.node.clone();
        let interval = Duration::from_millis(cfg.membership.heartbeat_interval_ms.max(10));
        let tick_handle = std::thread::spawn(move || {
            while !tick_stop.load(Ordering::Relaxed) {
                let now = now_ms();
                let discovered = discovery.poll().map_err(|e| e.to_string());
                match discovered {
                    Ok(records) => {
                        let ids: Vec<NodeId> =
                            records.iter().map(|r| r.node.clone()).collect();
                        {
                            let mut map = tick_peers.lock().unwrap();
                            for r in records {
                                map.insert(r.node.clone(), r);
                            }
                        }
                        tick_state.lock().unwrap().on_discovery(&ids, now);
                    }
                    Err(e) => {
                        let (_, warning) =
                            tick_state.lock().unwrap().resolve_members(Err(e), now);
                        if let Some(w) = warning {
                            tick_warnings.lock().unwrap().push(w);
                        }
                    }
                }

                let payload = wire::encode_heartbeat(&tick_node);
                let targets: Vec<(NodeId, String)> = tick_peers
                    .lock()
                    .unwrap()
                    .iter()
                    .filter(|(id, _)| **id != tick_node)
                    .map(|(id, r)| (id.clone(), r.member_addr.clone()))
                    .collect();
                for (_, addr) in targets {
                    // Unreachable peers simply miss heartbeats and expire.
                    let _ = send_heartbeat(&addr, &payload, interval);
                }

                tick_state.lock().unwrap().tick(now_ms());
                std::thread::sleep(interval);
            }
        });

        Ok(MembershipRuntime {
            state,
            peers,
            warnings,
            shutdown,
            local_addr,
            handles: vec![accept_handle, tick_handle],
        })
    }

    pub fn view(&self) -> ClusterView {
        self.state.lock().unwrap().view().clone()
    }

    pub fn local_addr(&self) -> &str {
        &self.local_addr
    }

    /// Query-path address for a peer, from the discovery records.
    pub fn query_addr(&self, node: &NodeId) -> Option<String> {
        self.peers
            .lock()
            .unwrap()
            .get(node)
            .map(|r| r.query_addr.clone())
    }

    pub fn take_warnings(&self) -> Vec<String> {
        std::mem::take(&mut self.warnings.lock().unwrap())
    }

    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

impl Drop for MembershipRuntime {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

fn handle_heartbeat_conn(
    mut stream: TcpStream,
    state: &Arc<Mutex<MembershipState>>,
    now_ms: u64,
) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_millis(500)))?;
    let payload = wire::read_frame(&mut stream, MAX_FRAME_LEN)?;
    let MembershipMessage::Heartbeat { from } = wire::decode_message(&payload)?;
    state.lock().unwrap().on_heartbeat(&from, now_ms);
    Ok(())
}

fn send_heartbeat(addr: &str, payload: &[u8], timeout: Duration) -> Result<()> {
    let addr = addr
        .parse()
        .map_err(|e| crate::error::Error::invalid(format!("bad peer address {addr}: {e}")))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout)?;
    stream.set_write_timeout(Some(timeout))?;
    wire::write_frame(&mut stream, payload)?;
    Ok(())
}
