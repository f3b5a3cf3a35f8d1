//! Query wire protocol, little-endian, carried in frames with a 4-byte
//! length prefix (shared with the membership framing).
//!
//! Request payload:
//!
//! ```text
//! magic "EBVSQRY1" (8) | u64 request_id | u32 hash_bytes | hash |
//! u16 category_count | u32 category_id ... | u32 N | u8 flags
//! ```
//!
//! Response payload:
//!
//! ```text
//! magic "EBVSRSP1" (8) | u64 request_id | u8 degraded | u32 result_count |
//! (u64 listing_id, u32 category_id, u16 hamming,
//!  f32 s_appearance, f32 s_aspect, f32 s_final) ...
//! ```
//!
//! Flag bit 0 requests re-ranking. Flag bit 1 marks a node-to-node
//! proxied request: the receiver only scans its own partitions instead
//! of fanning out again.

use crate::error::{Error, Result};
use crate::query::RankedResult;

pub const QUERY_MAGIC: &[u8; 8] = b"EBVSQRY1";
pub const RESPONSE_MAGIC: &[u8; 8] = b"EBVSRSP1";

pub const FLAG_RERANK: u8 = 1;
pub const FLAG_LOCAL_ONLY: u8 = 1 << 1;

/// Query frames are small; responses carry up to 10k results of 30 bytes.
pub const MAX_QUERY_FRAME: u32 = 16 * 1024 * 1024;

const RESULT_LEN: usize = 8 + 4 + 2 + 4 + 4 + 4;

#[derive(Clone, Debug, PartialEq)]
pub struct WireRequest {
    pub request_id: u64,
    pub hash: Vec<u8>,
    pub categories: Vec<u32>,
    pub n: u32,
    pub flags: u8,
}

impl WireRequest {
    pub fn rerank(&self) -> bool {
        self.flags & FLAG_RERANK != 0
    }

    pub fn local_only(&self) -> bool {
        self.flags & FLAG_LOCAL_ONLY != 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WireResponse {
    pub request_id: u64,
    pub degraded: bool,
    pub results: Vec<RankedResult>,
}

pub fn encode_request(req: &WireRequest) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 + 4 + req.hash.len() + 2 + req.categories.len() * 4 + 5);
    out.extend_from_slice(QUERY_MAGIC);
    out.extend_from_slice(&req.request_id.to_le_bytes());
    out.extend_from_slice(&(req.hash.len() as u32).to_le_bytes());
    out.extend_from_slice(&req.hash);
    out.extend_from_slice(&(req.categories.len() as u16).to_le_bytes());
    for cat in &req.categories {
        out.extend_from_slice(&cat.to_le_bytes());
    }
    out.extend_from_slice(&req.n.to_le_bytes());
    out.push(req.flags);
    out
}

pub fn decode_request(payload: &[u8]) -> Result<WireRequest> {
    let mut r = Reader::new(payload);
    let magic = r.bytes(8)?;
    if magic != QUERY_MAGIC {
        return Err(Error::protocol("magic", format!("got {magic:?}")));
    }
    let request_id = r.u64()?;
    let hash_bytes = r.u32()? as usize;
    let hash = r.bytes(hash_bytes)?.to_vec();
    let count = r.u16()? as usize;
    let mut categories = Vec::with_capacity(count);
    for _ in 0..count {
        categories.push(r.u32()?);
    }
    let n = r.u32()?;
    let flags = r.u8()?;
    r.finish()?;
    Ok(WireRequest {
        request_id,
        hash,
        categories,
        n,
        flags,
    })
}

pub fn encode_response(request_id: u64, degraded: bool, results: &[RankedResult]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 + 1 + 4 + results.len() * RESULT_LEN);
    out.extend_from_slice(RESPONSE_MAGIC);
    out.extend_from_slice(&request_id.to_le_bytes());
    out.push(u8::from(degraded));
    out.extend_from_slice(&(results.len() as u32).to_le_bytes());
    for r in results {
        out.extend_from_slice(&r.listing_id.to_le_bytes());
        out.extend_from_slice(&r.category_id.to_le_bytes());
        out.extend_from_slice(&r.hamming.to_le_bytes());
        out.extend_from_slice(&r.s_appearance.to_le_bytes());
        out.extend_from_slice(&r.s_aspect.to_le_bytes());
        out.extend_from_slice(&r.s_final.to_le_bytes());
    }
    out
}

pub fn decode_response(payload: &[u8]) -> Result<WireResponse> {
    let mut r = Reader::new(payload);
    let magic = r.bytes(8)?;
    if magic != RESPONSE_MAGIC {
        return Err(Error::protocol("magic", format!("got {magic:?}")));
    }
    let request_id = r.u64()?;
    let degraded = r.u8()? != 0;
    let count = r.u32()? as usize;
    let mut results = Vec::with_capacity(count);
    for _ in 0..count {
        results.push(RankedResult {
            listing_id: r.u64()?,
            category_id: r.u32()?,
            hamming: r.u16()?,
            s_appearance: r.f32()?,
            s_aspect: r.f32()?,
            s_final: r.f32()?,
        });
    }
    r.finish()?;
    Ok(WireResponse {
        request_id,
        degraded,
        results,
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::protocol(
                "length",
                format!("truncated payload at offset {}", self.pos),
            ));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::protocol(
                "length",
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_round_trip() {
        let req = WireRequest {
            request_id: 99,
            hash: vec![0xab; 512],
            categories: vec![3, 17, 99],
            n: 50,
            flags: FLAG_RERANK | FLAG_LOCAL_ONLY,
        };
        let payload = encode_request(&req);
        let got = decode_request(&payload).unwrap();
        assert_eq!(got, req);
        assert!(got.rerank());
        assert!(got.local_only());
    }

    #[test]
    fn response_round_trip() {
        let results = vec![
            RankedResult {
                listing_id: 7,
                category_id: 3,
                hamming: 12,
                s_appearance: 0.9,
                s_aspect: 0.5,
                s_final: 0.8,
            },
            RankedResult {
                listing_id: 8,
                category_id: 4,
                hamming: 40,
                s_appearance: 0.2,
                s_aspect: 0.0,
                s_final: 0.15,
            },
        ];
        let payload = encode_response(42, true, &results);
        let got = decode_response(&payload).unwrap();
        assert_eq!(got.request_id, 42);
        assert!(got.degraded);
        assert_eq!(got.results, results);
    }

    #[test]
    fn corrupt_payloads_rejected() {
        let req = WireRequest {
            request_id: 1,
            hash: vec![0u8; 8],
            categories: vec![1],
            n: 10,
            flags: 0,
        };
        let mut payload = encode_request(&req);
        payload[0] = b'X';
        assert!(decode_request(&payload).is_err());

        let mut truncated = encode_request(&req);
        truncated.truncate(truncated.len() - 3);
        assert!(decode_request(&truncated).is_err());

        let mut trailing = encode_request(&req);
        trailing.push(0);
        assert!(decode_request(&trailing).is_err());

        assert!(decode_response(&encode_request(&req)).is_err());
    }
}
