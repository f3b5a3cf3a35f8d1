//! TCP query serving: a node answers client requests with the full
//! fan-out path and proxied node-to-node requests (flag bit 1) with a
//! local scan. One frame in, one frame out, connections may be reused.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use visearch_cluster::wire::{read_frame, write_frame};
use visearch_cluster::NodeId;
use visearch_core::sig::BinarySignature;

use crate::error::{Error, Result};
use crate::query::{PartialResult, QueryRequest, RankedResult};
use crate::service::{NodeTransport, SearchEngine};
use crate::wire::{
    decode_request, decode_response, encode_request, encode_response, WireRequest, WireResponse,
    FLAG_LOCAL_ONLY, FLAG_RERANK, MAX_QUERY_FRAME,
};

pub struct QueryServer {
    local_addr: String,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl QueryServer {
    pub fn start(engine: Arc<SearchEngine>, bind_addr: &str) -> Result<Self> {
        let listener = TcpListener::bind(bind_addr)?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?.to_string();
        let shutdown = Arc::new(AtomicBool::new(false));
        let stop = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let engine = Arc::clone(&engine);
                        std::thread::spawn(move || {
                            let _ = handle_connection(stream, &engine);
                        });
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => std::thread::sleep(Duration::from_millis(5)),
                }
            }
        });
        Ok(QueryServer {
            local_addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn local_addr(&self) -> &str {
        &self.local_addr
    }

    pub fn shutdown(mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for QueryServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, engine: &SearchEngine) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(30)))?;
    stream.set_write_timeout(Some(Duration::from_secs(30)))?;
    loop {
        let payload = match read_frame(&mut stream, MAX_QUERY_FRAME) {
            Ok(p) => p,
            Err(_) => return Ok(()), // closed or timed out
        };
        let wire_req = decode_request(&payload)?;
        let response = answer(engine, &wire_req);
        let (degraded, results) = match response {
            Ok((results, degraded)) => (degraded, results),
            // Processing failures surface as an empty degraded response;
            // the connection stays usable.
            Err(_) => (true, Vec::new()),
        };
        let out = encode_response(wire_req.request_id, degraded, &results);
        write_frame(&mut stream, &out).map_err(Error::Cluster)?;
    }
}

fn answer(engine: &SearchEngine, wire_req: &WireRequest) -> Result<(Vec<RankedResult>, bool)> {
    let bits = engine.config().scoring.bits;
    let signature = BinarySignature::from_bytes(bits, wire_req.hash.clone())?;
    let req = QueryRequest {
        request_id: wire_req.request_id,
        signature,
        categories: wire_req.categories.iter().map(|c| (*c, 0.0)).collect(),
        per_category: wire_req.n,
        predicted_aspects: Vec::new(),
        rerank: wire_req.rerank(),
    };
    if wire_req.local_only() {
        let partial = engine.node_search(&req)?;
        Ok(flatten_partial(&partial, bits))
    } else {
        engine.serve_query(&req, wire_req.n as usize)
    }
}

/// Encodes a partial result as response records: per-category lists in
/// ascending category order, each already sorted by (hamming, id).
fn flatten_partial(partial: &PartialResult, bits: u32) -> (Vec<RankedResult>, bool) {
    let mut results = Vec::new();
    for (category, hits) in &partial.per_category {
        for hit in hits {
            let s = (1.0 - f64::from(hit.hamming) / f64::from(bits)) as f32;
            results.push(RankedResult {
                listing_id: hit.listing_id,
                category_id: *category,
                hamming: hit.hamming,
                s_appearance: s,
                s_aspect: 0.0,
                s_final: s,
            });
        }
    }
    (results, partial.degraded)
}

/// Client-side transport: proxies a request to a peer's query port with
/// the local-only flag set and regroups the flat response per category.
pub struct TcpTransport {
    resolve: Arc<dyn Fn(&NodeId) -> Option<String> + Send + Sync>,
}

impl TcpTransport {
    pub fn new(resolve: impl Fn(&NodeId) -> Option<String> + Send + Sync + 'static) -> Self {
        TcpTransport {
            resolve: Arc::new(resolve),
        }
    }

    pub fn from_map(map: std::collections::BTreeMap<NodeId, String>) -> Self {
        TcpTransport::new(move |node| map.get(node).cloned())
    }
}

impl NodeTransport for TcpTransport {
    fn node_query(
        &self,
        node: &NodeId,
        req: &QueryRequest,
        timeout: Duration,
    ) -> Result<PartialResult> {
        let addr = (self.resolve)(node).ok_or_else(|| Error::NodeUnreachable {
            node: node.to_string(),
            detail: "no known query address".to_string(),
        })?;
        let unreachable = |detail: String| Error::NodeUnreachable {
            node: node.to_string(),
            detail,
        };
        let sock_addr: std::net::SocketAddr =
            addr.parse().map_err(|e| unreachable(format!("{e}")))?;
        let mut stream =
            TcpStream::connect_timeout(&sock_addr, timeout).map_err(|e| unreachable(e.to_string()))?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;

        let wire_req = WireRequest {
            request_id: req.request_id,
            hash: req.signature.as_bytes().to_vec(),
            categories: req.category_ids(),
            n: req.per_category,
            flags: FLAG_LOCAL_ONLY,
        };
        write_frame(&mut stream, &encode_request(&wire_req))
            .map_err(|e| unreachable(e.to_string()))?;
        let payload = read_frame(&mut stream, MAX_QUERY_FRAME)
            .map_err(|e| unreachable(e.to_string()))?;
        let response = decode_response(&payload)?;

        let mut partial = PartialResult {
            degraded: response.degraded,
            ..Default::default()
        };
        for r in response.results {
            partial
                .per_category
                .entry(r.category_id)
                .or_default()
                .push(crate::query::Hit {
                    hamming: r.hamming,
                    listing_id: r.listing_id,
                });
        }
        Ok(partial)
    }
}

/// One-shot client request against a serving node; used by the CLI.
pub fn remote_query(
    addr: &str,
    request_id: u64,
    hash: &[u8],
    categories: &[u32],
    n: u32,
    rerank: bool,
    timeout: Duration,
) -> Result<WireResponse> {
    let sock_addr: std::net::SocketAddr = addr
        .parse()
        .map_err(|e| Error::invalid(format!("bad address {addr}: {e}")))?;
    let mut stream = TcpStream::connect_timeout(&sock_addr, timeout).map_err(|e| {
        Error::ClusterUnavailable(format!("cannot reach serving node {addr}: {e}"))
    })?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    let wire_req = WireRequest {
        request_id,
        hash: hash.to_vec(),
        categories: categories.to_vec(),
        n,
        flags: if rerank { FLAG_RERANK } else { 0 },
    };
    write_frame(&mut stream, &encode_request(&wire_req))?;
    let payload = read_frame(&mut stream, MAX_QUERY_FRAME)?;
    decode_response(&payload)
}
