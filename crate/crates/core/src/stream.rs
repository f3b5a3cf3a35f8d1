//! Text codec for listing update streams: one record per line,
//! tab-separated fields in fixed order:
//!
//! ```text
//! op  listing_id  category_id  timestamp  aspects  image_hex
//! ```
//!
//! `op` is `upsert` or `delete`; deletes leave `category_id`, `aspects`
//! and `image_hex` empty. Aspects are `name=value` pairs joined by `;`.
//! Names and values may not contain tabs, newlines, `;` or `=`.

use crate::error::{Error, Result};
use crate::ingest::{ListingUpdate, UpdateOp};
use crate::score::{Aspect, AspectSet};

pub fn format_update_line(update: &ListingUpdate) -> Result<String> {
    match update.op {
        UpdateOp::Upsert => Ok(format!(
            "upsert\t{}\t{}\t{}\t{}\t{}",
            update.listing_id,
            update.category_id,
            update.timestamp,
            format_aspects(&update.aspects)?,
            hex_encode(&update.image_bytes),
        )),
        UpdateOp::Delete => Ok(format!(
            "delete\t{}\t\t{}\t\t",
            update.listing_id, update.timestamp
        )),
    }
}

pub fn parse_update_line(line: &str) -> Result<ListingUpdate> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(Error::invalid(format!(
            "expected 6 tab-separated fields, got {}",
            fields.len()
        )));
    }
    let listing_id: u64 = fields[1]
        .parse()
        .map_err(|_| Error::invalid(format!("bad listing id {:?}", fields[1])))?;
    let timestamp: u64 = fields[3]
        .parse()
        .map_err(|_| Error::invalid(format!("bad timestamp {:?}", fields[3])))?;
    match fields[0] {
        "upsert" => {
            let category_id: u32 = fields[2]
                .parse()
                .map_err(|_| Error::invalid(format!("bad category id {:?}", fields[2])))?;
            let image_bytes = hex_decode(fields[5])?;
            if image_bytes.is_empty() {
                return Err(Error::invalid("upsert requires image bytes"));
            }
            Ok(ListingUpdate {
                listing_id,
                category_id,
                image_bytes,
                aspects: parse_aspects(fields[4])?,
                op: UpdateOp::Upsert,
                timestamp,
            })
        }
        "delete" => {
            if !fields[2].is_empty() || !fields[4].is_empty() || !fields[5].is_empty() {
                return Err(Error::invalid("delete must leave category/aspects/image empty"));
            }
            Ok(ListingUpdate {
                listing_id,
                category_id: 0,
                image_bytes: Vec::new(),
                aspects: AspectSet::new(),
                op: UpdateOp::Delete,
                timestamp,
            })
        }
        other => Err(Error::invalid(format!("unknown op {other:?}"))),
    }
}

fn format_aspects(aspects: &AspectSet) -> Result<String> {
    let mut parts = Vec::with_capacity(aspects.len());
    for aspect in aspects.iter() {
        for field in [&aspect.name, &aspect.value] {
            if field.contains(['\t', '\n', ';', '=']) {
                return Err(Error::invalid(format!(
                    "aspect field {field:?} contains a reserved character"
                )));
            }
        }
        parts.push(format!("{}={}", aspect.name, aspect.value));
    }
    Ok(parts.join(";"))
}

fn parse_aspects(field: &str) -> Result<AspectSet> {
    let mut set = AspectSet::new();
    if field.is_empty() {
        return Ok(set);
    }
    for pair in field.split(';') {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("bad aspect pair {pair:?}")))?;
        if name.trim().is_empty() {
            return Err(Error::invalid(format!("empty aspect name in {pair:?}")));
        }
        set.insert(Aspect::new(name, value));
    }
    Ok(set)
}

pub fn hex_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn hex_decode(hex: &str) -> Result<Vec<u8>> {
    if hex.len() % 2 != 0 {
        return Err(Error::invalid("hex string has odd length"));
    }
    (0..hex.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&hex[i..i + 2], 16)
                .map_err(|_| Error::invalid(format!("bad hex at offset {i}")))
        })
        .collect()
}
