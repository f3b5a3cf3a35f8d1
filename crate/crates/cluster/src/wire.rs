//! Membership wire messages. Every message travels in a frame with a
//! 4-byte little-endian length prefix; the payload is:
//!
//! ```text
//! magic "EBVSMBR1" (8) | u16 version | u8 kind | u16 node_id_len | node_id
//! ```
//!
//! Kind 1 is the only message: a heartbeat naming the sender.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::view::NodeId;

pub const MEMBERSHIP_MAGIC: &[u8; 8] = b"EBVSMBR1";
pub const MEMBERSHIP_VERSION: u16 = 1;
pub const MSG_HEARTBEAT: u8 = 1;

/// Upper bound on accepted frames; membership payloads are tiny.
pub const MAX_FRAME_LEN: u32 = 64 * 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MembershipMessage {
    Heartbeat { from: NodeId },
}

pub fn encode_heartbeat(from: &NodeId) -> Vec<u8> {
    let id = from.as_str().as_bytes();
    let mut out = Vec::with_capacity(8 + 2 + 1 + 2 + id.len());
    out.extend_from_slice(MEMBERSHIP_MAGIC);
    out.extend_from_slice(&MEMBERSHIP_VERSION.to_le_bytes());
    out.push(MSG_HEARTBEAT);
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out
}

pub fn decode_message(payload: &[u8]) -> Result<MembershipMessage> {
    if payload.len() < 13 {
        return Err(Error::protocol("length", "payload shorter than fixed header"));
    }
    if &payload[0..8] != MEMBERSHIP_MAGIC {
        return Err(Error::protocol("magic", format!("got {:?}", &payload[0..8])));
    }
    let version = u16::from_le_bytes(payload[8..10].try_into().unwrap());
    if version != MEMBERSHIP_VERSION {
        return Err(Error::protocol("version", format!("unsupported {version}")));
    }
    match payload[10] {
        MSG_HEARTBEAT => {
            let len = usize::from(u16::from_le_bytes(payload[11..13].try_into().unwrap()));
            if payload.len() != 13 + len {
                return Err(Error::protocol("length", "node id length mismatch"));
            }
            let id = std::str::from_utf8(&payload[13..])
                .map_err(|e| Error::protocol("encoding", e.to_string()))?;
            Ok(MembershipMessage::Heartbeat {
                from: NodeId::new(id),
            })
        }
        kind => Err(Error::protocol("kind", format!("unknown message kind {kind}"))),
    }
}

/// Writes one length-prefixed frame.
pub fn write_frame(w: &mut impl Write, payload: &[u8]) -> Result<()> {
    w.write_all(&(payload.len() as u32).to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

/// Reads one length-prefixed frame, bounded by `max_len`.
pub fn read_frame(r: &mut impl Read, max_len: u32) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len);
    if len > max_len {
        return Err(Error::protocol(
            "frame length",
            format!("{len} exceeds cap {max_len}"),
        ));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(payload)
}
