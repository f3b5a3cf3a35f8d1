//! Bit-exact index file format and in-memory category partitions.
//!
//! File layout (all integers little-endian):
//!
//! | offset | size | field          |
//! |--------|------|----------------|
//! | 0      | 8    | magic "EBVSIDX1" |
//! | 8      | 4    | format_version |
//! | 12     | 4    | category_id    |
//! | 16     | 4    | hash_bytes     |
//! | 20     | 8    | record_count   |
//! | 28     | 4    | model_version  |
//!
//! followed by `record_count` fixed-length records: 8-byte listing id,
//! then `hash_bytes` of signature. The record layout matches the
//! production extract format (8 + 512 bytes at the default width); the
//! 32-byte header is an addition that makes the files self-describing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sig::BinarySignature;

pub const INDEX_MAGIC: &[u8; 8] = b"EBVSIDX1";
pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const INDEX_HEADER_LEN: usize = 32;

pub type ListingId = u64;
pub type CategoryId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexFileHeader {
    pub format_version: u32,
    pub category_id: CategoryId,
    pub hash_bytes: u32,
    pub record_count: u64,
    pub model_version: u32,
}

impl IndexFileHeader {
    pub fn record_stride(&self) -> usize {
        8 + self.hash_bytes as usize
    }

    fn encode(&self) -> [u8; INDEX_HEADER_LEN] {
        let mut buf = [0u8; INDEX_HEADER_LEN];
        buf[0..8].copy_from_slice(INDEX_MAGIC);
        buf[8..12].copy_from_slice(&self.format_version.to_le_bytes());
        buf[12..16].copy_from_slice(&self.category_id.to_le_bytes());
        buf[16..20].copy_from_slice(&self.hash_bytes.to_le_bytes());
        buf[20..28].copy_from_slice(&self.record_count.to_le_bytes());
        buf[28..32].copy_from_slice(&self.model_version.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8]) -> Result<Self> {
        if buf.len() < INDEX_HEADER_LEN {
            return Err(Error::corruption(
                "header length",
                format!("file is {} bytes, header needs {INDEX_HEADER_LEN}", buf.len()),
            ));
        }
        if &buf[0..8] != INDEX_MAGIC {
            return Err(Error::corruption(
                "magic",
                format!("expected {INDEX_MAGIC:?}, got {:?}", &buf[0..8]),
            ));
        }
        let header = IndexFileHeader {
            format_version: u32::from_le_bytes(buf[8..12].try_into().unwrap()),
            category_id: u32::from_le_bytes(buf[12..16].try_into().unwrap()),
            hash_bytes: u32::from_le_bytes(buf[16..20].try_into().unwrap()),
            record_count: u64::from_le_bytes(buf[20..28].try_into().unwrap()),
            model_version: u32::from_le_bytes(buf[28..32].try_into().unwrap()),
        };
        if header.format_version != INDEX_FORMAT_VERSION {
            return Err(Error::corruption(
                "format version",
                format!("unsupported version {}", header.format_version),
            ));
        }
        if header.hash_bytes == 0 {
            return Err(Error::corruption("hash width", "hash_bytes is zero".to_string()));
        }
        Ok(header)
    }
}

/// Contiguous parallel arrays of listing ids and packed signatures for
/// one shard of one category; the unit every scan runs over.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryPartition {
    pub category_id: CategoryId,
    pub partition_index: u32,
    hash_bytes: u32,
    listing_ids: Vec<ListingId>,
    signatures: Vec<u8>,
}

impl CategoryPartition {
    pub fn new(
        category_id: CategoryId,
        partition_index: u32,
        hash_bytes: u32,
        listing_ids: Vec<ListingId>,
        signatures: Vec<u8>,
    ) -> Result<Self> {
        if hash_bytes == 0 {
            return Err(Error::invalid("hash_bytes must be positive"));
        }
        if signatures.len() != listing_ids.len() * hash_bytes as usize {
            return Err(Error::invalid(format!(
                "signature bytes ({}) must equal {} records x {} bytes",
                signatures.len(),
                listing_ids.len(),
                hash_bytes
            )));
        }
        Ok(CategoryPartition {
            category_id,
            partition_index,
            hash_bytes,
            listing_ids,
            signatures,
        })
    }

    /// Builds a single partition from (listing id, signature) records.
    pub fn from_records(
        category_id: CategoryId,
        hash_bytes: u32,
        records: &[(ListingId, BinarySignature)],
    ) -> Result<Self> {
        let mut listing_ids = Vec::with_capacity(records.len());
        let mut signatures = Vec::with_capacity(records.len() * hash_bytes as usize);
        for (id, sig) in records {
            if sig.as_bytes().len() != hash_bytes as usize {
                return Err(Error::invalid(format!(
                    "signature is {} bytes, expected {hash_bytes}",
                    sig.as_bytes().len()
                )));
            }
            listing_ids.push(*id);
            signatures.extend_from_slice(sig.as_bytes());
        }
        CategoryPartition::new(category_id, 0, hash_bytes, listing_ids, signatures)
    }

    pub fn len(&self) -> usize {
        self.listing_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.listing_ids.is_empty()
    }

    pub fn hash_bytes(&self) -> u32 {
        self.hash_bytes
    }

    pub fn listing_ids(&self) -> &[ListingId] {
        &self.listing_ids
    }

    pub fn signature_bytes(&self) -> &[u8] {
        &self.signatures
    }

    pub fn signature_at(&self, i: usize) -> &[u8] {
        let stride = self.hash_bytes as usize;
        &self.signatures[i * stride..(i + 1) * stride]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ListingId, &[u8])> {
        self.listing_ids
            .iter()
            .copied()
            .zip(self.signatures.chunks_exact(self.hash_bytes as usize))
    }
}

/// Splits a partition into `n` contiguous, order-preserving pieces whose
/// sizes differ by at most one; the remainder goes to the lowest-indexed
/// pieces. Concatenating the outputs reproduces the input.
pub fn split_partition(p: &CategoryPartition, n: usize) -> Result<Vec<CategoryPartition>> {
    if n < 1 {
        return Err(Error::invalid("partition count must be at least 1"));
    }
    let len = p.len();
    let base = len / n;
    let rem = len % n;
    let stride = p.hash_bytes as usize;
    let mut out = Vec::with_capacity(n);
    let mut start = 0usize;
    for i in 0..n {
        let size = base + usize::from(i < rem);
        let ids = p.listing_ids[start..start + size].to_vec();
        let sigs = p.signatures[start * stride..(start + size) * stride].to_vec();
        out.push(CategoryPartition {
            category_id: p.category_id,
            partition_index: i as u32,
            hash_bytes: p.hash_bytes,
            listing_ids: ids,
            signatures: sigs,
        });
        start += size;
    }
    Ok(out)
}

/// Canonical index file location: `<root>/<model_version>/<category_id>.idx`.
pub fn index_path(root: &Path, model_version: u32, category_id: CategoryId) -> PathBuf {
    root.join(model_version.to_string())
        .join(format!("{category_id}.idx"))
}

/// Writes an index file; records must be sorted by strictly ascending
/// listing id and share `hash_bytes`. Returns the bytes written.
pub fn write_index(
    category_id: CategoryId,
    model_version: u32,
    hash_bytes: u32,
    records: &[(ListingId, BinarySignature)],
    path: &Path,
) -> Result<u64> {
    if hash_bytes == 0 {
        return Err(Error::invalid("hash_bytes must be positive"));
    }
    for pair in records.windows(2) {
        if pair[0].0 >= pair[1].0 {
            return Err(Error::invalid(format!(
                "records must be sorted by strictly ascending listing id \
                 ({} then {})",
                pair[0].0, pair[1].0
            )));
        }
    }
    for (id, sig) in records {
        if sig.as_bytes().len() != hash_bytes as usize {
            return Err(Error::invalid(format!(
                "listing {id}: signature is {} bytes, expected {hash_bytes}",
                sig.as_bytes().len()
            )));
        }
    }
    let header = IndexFileHeader {
        format_version: INDEX_FORMAT_VERSION,
        category_id,
        hash_bytes,
        record_count: records.len() as u64,
        model_version,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    w.write_all(&header.encode())?;
    for (id, sig) in records {
        w.write_all(&id.to_le_bytes())?;
        w.write_all(sig.as_bytes())?;
    }
    w.flush()?;
    Ok((INDEX_HEADER_LEN + records.len() * header.record_stride()) as u64)
}

/// Reads and validates an index file. Record order is not enforced here:
/// extracts written by this module are sorted, but concatenated
/// intermediate extracts may interleave id ranges.
pub fn read_index(path: &Path) -> Result<(IndexFileHeader, CategoryPartition)> {
    let bytes = fs::read(path)?;
    read_index_bytes(&bytes)
}

pub fn read_index_bytes(bytes: &[u8]) -> Result<(IndexFileHeader, CategoryPartition)> {
    let header = IndexFileHeader::decode(bytes)?;
    let body = &bytes[INDEX_HEADER_LEN..];
    let stride = header.record_stride();
    if body.len() % stride != 0 {
        return Err(Error::corruption(
            "record stride",
            format!(
                "body length not a multiple of record stride ({} % {stride} != 0)",
                body.len()
            ),
        ));
    }
    let records = body.len() / stride;
    if records as u64 != header.record_count {
        return Err(Error::corruption(
            "record count",
            format!(
                "header says {} records, body holds {records}",
                header.record_count
            ),
        ));
    }
    let mut listing_ids = Vec::with_capacity(records);
    let mut signatures = Vec::with_capacity(records * header.hash_bytes as usize);
    for rec in body.chunks_exact(stride) {
        listing_ids.push(u64::from_le_bytes(rec[0..8].try_into().unwrap()));
        signatures.extend_from_slice(&rec[8..]);
    }
    let partition = CategoryPartition::new(
        header.category_id,
        0,
        header.hash_bytes,
        listing_ids,
        signatures,
    )?;
    Ok((header, partition))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_records(n: usize, bits: u32, seed: u64) -> Vec<(u64, BinarySignature)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + rng.random_range(0..3)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.iter()
            .map(|id| {
                let mut sig = BinarySignature::zeros(bits);
                for i in 0..bits {
                    sig.set(i, rng.random::<bool>());
                }
                (*id, sig)
            })
            .collect()
    }

    #[test]
    fn empty_index_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("7.idx");
        let written = write_index(7, 1, 512, &[], &path).unwrap();
        assert_eq!(written, 32);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 32);
        let (header, partition) = read_index(&path).unwrap();
        assert_eq!(header.record_count, 0);
        assert!(partition.is_empty());
    }

    #[test]
    fn single_record_stride_is_520_at_default_width() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("9.idx");
        let records = vec![(42u64, BinarySignature::ones(4096))];
        let written = write_index(9, 3, 512, &records, &path).unwrap();
        assert_eq!(written, 32 + 520);
        let (header, _) = read_index(&path).unwrap();
        assert_eq!(header.record_stride(), 520);
        assert_eq!(header.model_version, 3);
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("11.idx");
        let records = random_records(1000, 128, 4);
        write_index(11, 2, 16, &records, &path).unwrap();
        let (header, partition) = read_index(&path).unwrap();
        assert_eq!(header.record_count, records.len() as u64);
        assert_eq!(partition.len(), records.len());
        for (i, (id, sig)) in records.iter().enumerate() {
            assert_eq!(partition.listing_ids()[i], *id);
            assert_eq!(partition.signature_at(i), sig.as_bytes());
        }
    }

    #[test]
    fn unsorted_or_duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.idx");
        let a = (5u64, BinarySignature::zeros(64));
        let b = (3u64, BinarySignature::zeros(64));
        assert!(write_index(1, 1, 8, &[a.clone(), b], &path).is_err());
        assert!(write_index(1, 1, 8, &[a.clone(), a], &path).is_err());
    }

    #[test]
    fn truncated_body_names_stride_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        let records = random_records(3, 64, 5);
        write_index(2, 1, 8, &records, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 5);
        match read_index_bytes(&bytes) {
            Err(Error::Corruption { check: "record stride", detail }) => {
                assert!(detail.contains("body length not a multiple of record stride"));
            }
            other => panic!("expected stride corruption, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_and_count_mismatch_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.idx");
        let records = random_records(4, 64, 6);
        write_index(2, 1, 8, &records, &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'Z';
        assert!(matches!(
            read_index_bytes(&bad_magic),
            Err(Error::Corruption { check: "magic", .. })
        ));

        let mut bad_count = good.clone();
        bad_count[20..28].copy_from_slice(&99u64.to_le_bytes());
        assert!(matches!(
            read_index_bytes(&bad_count),
            Err(Error::Corruption { check: "record count", .. })
        ));
    }

    #[test]
    fn concatenated_bodies_load_under_summed_header() {
        // Per-job-partition extracts are concatenated after the header.
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("p1.idx");
        let p2 = dir.path().join("p2.idx");
        let r1 = random_records(10, 64, 7);
        let r2: Vec<(u64, BinarySignature)> = random_records(7, 64, 8)
            .into_iter()
            .map(|(id, sig)| (id + 2, sig)) // overlapping id range
            .collect();
        write_index(3, 1, 8, &r1, &p1).unwrap();
        write_index(3, 1, 8, &r2, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();

        let header = IndexFileHeader {
            format_version: INDEX_FORMAT_VERSION,
            category_id: 3,
            hash_bytes: 8,
            record_count: (r1.len() + r2.len()) as u64,
            model_version: 1,
        };
        let mut combined = header.encode().to_vec();
        combined.extend_from_slice(&b1[INDEX_HEADER_LEN..]);
        combined.extend_from_slice(&b2[INDEX_HEADER_LEN..]);
        let (h, partition) = read_index_bytes(&combined).unwrap();
        assert_eq!(h.record_count, (r1.len() + r2.len()) as u64);
        assert_eq!(partition.len(), r1.len() + r2.len());
    }

    #[test]
    fn split_sizes_and_concatenation() {
        let records = random_records(10, 64, 9);
        let p = CategoryPartition::from_records(5, 8, &records).unwrap();
        let parts = split_partition(&p, 3).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|q| q.len()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert_eq!(parts[0].partition_index, 0);
        assert_eq!(parts[2].partition_index, 2);

        let identity = split_partition(&p, 1).unwrap();
        assert_eq!(identity[0].listing_ids(), p.listing_ids());

        let mut ids = Vec::new();
        let mut sigs = Vec::new();
        for part in &parts {
            ids.extend_from_slice(part.listing_ids());
            sigs.extend_from_slice(part.signature_bytes());
        }
        assert_eq!(ids, p.listing_ids());
        assert_eq!(sigs, p.signature_bytes());

        assert!(split_partition(&p, 0).is_err());
        // More pieces than records: trailing pieces are empty.
        let wide = split_partition(&p, 12).unwrap();
        assert_eq!(wide.iter().map(|q| q.len()).sum::<usize>(), p.len());
    }

    #[test]
    fn storage_arithmetic_matches_production_claims() {
        // 200M records at the default width stay under 100 GB (within 7%),
        // and binary signatures save >= 90% versus 32 KB float vectors.
        let stride = 8u64 + 512;
        assert_eq!(stride, 520);
        let total = 200_000_000u64 * stride;
        assert!(total < (100_000_000_000.0 * 1.07) as u64);
        let float_bytes = 8192 * 4;
        let reduction = 1.0 - stride as f64 / f64::from(float_bytes);
        assert!(reduction >= 0.90);
    }
}
