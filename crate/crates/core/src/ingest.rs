//! Near-real-time listing ingestion: MD5 duplicate detection,
//! micro-batch hash extraction, the versioned hash store and per-category
//! index extracts.
//!
//! The store is an in-process stand-in for the production distributed
//! table: images are keyed by the MD5 of their raw bytes, each image
//! keeps the hashes of up to two model versions (the newest two seen, so
//! extracts for the older version stay valid while a re-hash migration
//! runs), and listings reference images so exact duplicates are stored
//! once. The stored feature vector stands in for the cloud-stored image
//! when a migration needs to recompute hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use md5::{Digest, Md5};

use crate::error::{Error, Result};
use crate::featurize::Featurizer;
use crate::hash::{FeatureVector, HashProjector};
use crate::index::{index_path, write_index, CategoryId, ListingId};
use crate::score::{Aspect, AspectSet};
use crate::sig::{byte_len, BinarySignature};

/// 16-byte MD5 digest of raw image bytes; the duplicate-detection key.
pub type ImageKey = [u8; 16];

/// MD5 over the raw bytes, no decoding or resizing.
pub fn dedup_key(image_bytes: &[u8]) -> Result<ImageKey> {
    if image_bytes.is_empty() {
        return Err(Error::invalid("image bytes must be nonempty"));
    }
    let digest = Md5::digest(image_bytes);
    Ok(digest.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOp {
    Upsert,
    Delete,
}

/// One listing change event; `timestamp` is a monotone sequence number
/// used to drop out-of-order replays.
#[derive(Clone, Debug)]
pub struct ListingUpdate {
    pub listing_id: ListingId,
    pub category_id: CategoryId,
    pub image_bytes: Vec<u8>,
    pub aspects: AspectSet,
    pub op: UpdateOp,
    pub timestamp: u64,
}

#[derive(Clone, Debug)]
pub struct ImageEntry {
    pub ref_count: u32,
    pub features: FeatureVector,
    /// Up to two (model_version, signature) pairs, ascending by version.
    pub hashes: Vec<(u32, BinarySignature)>,
}

#[derive(Clone, Debug)]
pub struct ListingEntry {
    pub category_id: CategoryId,
    pub image_key: ImageKey,
    pub aspects: AspectSet,
    pub timestamp: u64,
    pub live: bool,
}

/// Counters returned by [`HashStore::ingest_batch`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BatchCounts {
    /// Images seen for the first time; each cost one hash computation.
    pub new_images_hashed: u64,
    /// Upserts that linked to an image already in the store.
    pub duplicates_linked: u64,
    pub deletions: u64,
    /// Content-identical upserts (no state change).
    pub unchanged: u64,
    /// Deletes of unknown or already-deleted listings.
    pub warnings: u64,
    /// Updates older than the stored listing state.
    pub stale_skipped: u64,
}

pub const STORE_MAGIC: &[u8; 8] = b"EBVSSTO1";
pub const STORE_FORMAT_VERSION: u32 = 1;

/// Versioned hash store plus the listing catalog.
#[derive(Clone, Debug)]
pub struct HashStore {
    dim: u32,
    bits: u32,
    images: BTreeMap<ImageKey, ImageEntry>,
    listings: BTreeMap<ListingId, ListingEntry>,
    hash_computations: u64,
}

impl HashStore {
    pub fn new(dim: u32, bits: u32) -> Self {
        HashStore {
            dim,
            bits,
            images: BTreeMap::new(),
            listings: BTreeMap::new(),
            hash_computations: 0,
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    pub fn live_listing_count(&self) -> usize {
        self.listings.values().filter(|l| l.live).count()
    }

    /// Total hash computations ever performed by this store; each unique
    /// (image, model version) pair is hashed at most once.
    pub fn hash_computations(&self) -> u64 {
        self.hash_computations
    }

    pub fn versions_present(&self) -> BTreeSet<u32> {
        self.images
            .values()
            .flat_map(|e| e.hashes.iter().map(|(v, _)| *v))
            .collect()
    }

    pub fn image(&self, key: &ImageKey) -> Option<&ImageEntry> {
        self.images.get(key)
    }

    pub fn listing(&self, id: ListingId) -> Option<&ListingEntry> {
        self.listings.get(&id)
    }

    pub fn listing_aspects(&self, id: ListingId) -> Option<&AspectSet> {
        self.listings
            .get(&id)
            .filter(|l| l.live)
            .map(|l| &l.aspects)
    }

    pub fn live_listings(&self) -> impl Iterator<Item = (ListingId, &ListingEntry)> {
        self.listings
            .iter()
            .filter(|(_, l)| l.live)
            .map(|(id, l)| (*id, l))
    }

    /// Signature of a listing's image under `model_version`, if stored.
    pub fn listing_signature(&self, id: ListingId, model_version: u32) -> Option<&BinarySignature> {
        let listing = self.listings.get(&id).filter(|l| l.live)?;
        let entry = self.images.get(&listing.image_key)?;
        entry
            .hashes
            .iter()
            .find(|(v, _)| *v == model_version)
            .map(|(_, sig)| sig)
    }

    /// Deep copy for snapshot-isolated readers. The single writer keeps
    /// mutating the original while extracts or migrations work on the
    /// clone.
    pub fn snapshot(&self) -> HashStore {
        self.clone()
    }

    /// Applies a micro-batch. Unseen images are featurized and hashed
    /// once; repeated images are cross-linked; deletes tombstone the
    /// listing and drop the image when its last reference goes away.
    pub fn ingest_batch(
        &mut self,
        updates: &[ListingUpdate],
        projector: &HashProjector,
        featurizer: &dyn Featurizer,
    ) -> Result<BatchCounts> {
        if projector.bits() != self.bits {
            return Err(Error::config(format!(
                "projector width {} does not match store width {}",
                projector.bits(),
                self.bits
            )));
        }
        if projector.dim() != self.dim || featurizer.dim() != self.dim {
            return Err(Error::config("feature dimension does not match store"));
        }
        for u in updates {
            if u.op == UpdateOp::Upsert && u.image_bytes.is_empty() {
                return Err(Error::invalid(format!(
                    "listing {}: upsert with empty image bytes",
                    u.listing_id
                )));
            }
        }

        let mut counts = BatchCounts::default();
        for u in updates {
            match u.op {
                UpdateOp::Upsert => self.apply_upsert(u, projector, featurizer, &mut counts)?,
                UpdateOp::Delete => self.apply_delete(u, &mut counts),
            }
        }
        Ok(counts)
    }

    fn apply_upsert(
        &mut self,
        u: &ListingUpdate,
        projector: &HashProjector,
        featurizer: &dyn Featurizer,
        counts: &mut BatchCounts,
    ) -> Result<()> {
        if let Some(existing) = self.listings.get(&u.listing_id) {
            if existing.timestamp > u.timestamp {
                counts.stale_skipped += 1;
                return Ok(());
            }
        }
        let key = dedup_key(&u.image_bytes)?;
        if let Some(existing) = self.listings.get_mut(&u.listing_id) {
            if existing.live
                && existing.image_key == key
                && existing.category_id == u.category_id
                && existing.aspects == u.aspects
            {
                existing.timestamp = existing.timestamp.max(u.timestamp);
                counts.unchanged += 1;
                return Ok(());
            }
        }

        if let Some(entry) = self.images.get_mut(&key) {
            entry.ref_count += 1;
            counts.duplicates_linked += 1;
        } else {
            let features = featurizer.featurize(&u.image_bytes);
            let sig = projector.extract_hash(&features)?;
            self.hash_computations += 1;
            self.images.insert(
                key,
                ImageEntry {
                    ref_count: 1,
                    features,
                    hashes: vec![(projector.version(), sig)],
                },
            );
            counts.new_images_hashed += 1;
        }

        let previous = self.listings.insert(
            u.listing_id,
            ListingEntry {
                category_id: u.category_id,
                image_key: key,
                aspects: u.aspects.clone(),
                timestamp: u.timestamp,
                live: true,
            },
        );
        if let Some(prev) = previous {
            if prev.live {
                self.unlink_image(&prev.image_key);
            }
        }
        Ok(())
    }

    fn apply_delete(&mut self, u: &ListingUpdate, counts: &mut BatchCounts) {
        let Some(existing) = self.listings.get(&u.listing_id) else {
            counts.warnings += 1;
            return;
        };
        if !existing.live {
            counts.warnings += 1;
            return;
        }
        if existing.timestamp > u.timestamp {
            counts.stale_skipped += 1;
            return;
        }
        let key = existing.image_key;
        let entry = self.listings.get_mut(&u.listing_id).unwrap();
        entry.live = false;
        entry.timestamp = u.timestamp;
        self.unlink_image(&key);
        counts.deletions += 1;
    }

    fn unlink_image(&mut self, key: &ImageKey) {
        if let Some(entry) = self.images.get_mut(key) {
            entry.ref_count = entry.ref_count.saturating_sub(1);
            if entry.ref_count == 0 {
                self.images.remove(key);
            }
        }
    }

    /// Starts a migration that adds `projector`'s hash version to every
    /// stored image, evicting the oldest version where an image would
    /// exceed two. Returns `None` when every image already carries the
    /// version (a same-version rehash is a no-op).
    pub fn begin_rehash(&self, projector: &HashProjector) -> Result<Option<Rehash>> {
        if projector.bits() != self.bits || projector.dim() != self.dim {
            return Err(Error::config(
                "rehash projector shape does not match store",
            ));
        }
        let pending: Vec<ImageKey> = self
            .images
            .iter()
            .filter(|(_, e)| !e.hashes.iter().any(|(v, _)| *v == projector.version()))
            .map(|(k, _)| *k)
            .collect();
        if pending.is_empty() {
            return Ok(None);
        }
        Ok(Some(Rehash {
            pending,
            pos: 0,
            projector: projector.clone(),
        }))
    }

    /// Runs a full migration; returns the number of images rehashed.
    pub fn rehash_all(&mut self, projector: &HashProjector) -> Result<usize> {
        match self.begin_rehash(projector)? {
            None => Ok(0),
            Some(mut rehash) => {
                let mut n = 0;
                while rehash.step(self)? {
                    n += 1;
                }
                Ok(n)
            }
        }
    }

    /// Generates the per-category extract files for `model_version` under
    /// `index_root` and returns the manifest. Every supported category
    /// gets a file (possibly header-only); records are sorted by
    /// ascending listing id.
    pub fn run_extract(
        &self,
        model_version: u32,
        supported: &BTreeSet<CategoryId>,
        index_root: &Path,
    ) -> Result<ExtractManifest> {
        if !self.versions_present().contains(&model_version) {
            return Err(Error::config(format!(
                "hash store does not contain model version {model_version}"
            )));
        }
        let mut per_cat: BTreeMap<CategoryId, Vec<(ListingId, BinarySignature)>> =
            supported.iter().map(|c| (*c, Vec::new())).collect();
        let mut total_scanned = 0u64;
        let mut skipped_missing_hash = 0u64;
        for (id, listing) in &self.listings {
            if !listing.live {
                continue;
            }
            total_scanned += 1;
            if !supported.contains(&listing.category_id) {
                continue;
            }
            let hash = self
                .images
                .get(&listing.image_key)
                .and_then(|e| e.hashes.iter().find(|(v, _)| *v == model_version));
            match hash {
                Some((_, sig)) => per_cat
                    .get_mut(&listing.category_id)
                    .unwrap()
                    .push((*id, sig.clone())),
                None => skipped_missing_hash += 1,
            }
        }

        let hash_bytes = byte_len(self.bits) as u32;
        let mut entries = Vec::with_capacity(per_cat.len());
        for (cat, records) in &per_cat {
            let path = index_path(index_root, model_version, *cat);
            write_index(*cat, model_version, hash_bytes, records, &path)?;
            entries.push(ManifestEntry {
                category_id: *cat,
                record_count: records.len() as u64,
                path: path.to_string_lossy().into_owned(),
            });
        }
        Ok(ExtractManifest {
            model_version,
            total_scanned,
            skipped_missing_hash,
            entries,
        })
    }

    /// Writes the snapshot. Layout (little-endian): magic "EBVSSTO1",
    /// u32 format version, u32 dim, u32 bits, u64 hash_computations,
    /// u64 image count, images sorted by key (16-byte key, u32 ref_count,
    /// dim f32 features, u8 hash count, each hash as u32 version +
    /// packed signature bytes), u64 listing count, listings sorted by id
    /// (u64 id, u32 category, u64 timestamp, u8 live, 16-byte image key,
    /// u16 aspect count, each aspect as length-prefixed name and value).
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(STORE_MAGIC)?;
        w.write_all(&STORE_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.dim.to_le_bytes())?;
        w.write_all(&self.bits.to_le_bytes())?;
        w.write_all(&self.hash_computations.to_le_bytes())?;
        w.write_all(&(self.images.len() as u64).to_le_bytes())?;
        for (key, entry) in &self.images {
            w.write_all(key)?;
            w.write_all(&entry.ref_count.to_le_bytes())?;
            for v in &entry.features {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&[entry.hashes.len() as u8])?;
            for (version, sig) in &entry.hashes {
                w.write_all(&version.to_le_bytes())?;
                w.write_all(sig.as_bytes())?;
            }
        }
        w.write_all(&(self.listings.len() as u64).to_le_bytes())?;
        for (id, listing) in &self.listings {
            w.write_all(&id.to_le_bytes())?;
            w.write_all(&listing.category_id.to_le_bytes())?;
            w.write_all(&listing.timestamp.to_le_bytes())?;
            w.write_all(&[u8::from(listing.live)])?;
            w.write_all(&listing.image_key)?;
            w.write_all(&(listing.aspects.len() as u16).to_le_bytes())?;
            for aspect in listing.aspects.iter() {
                write_str(w, &aspect.name)?;
                write_str(w, &aspect.value)?;
            }
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|e| Error::corruption("header length", e.to_string()))?;
        if &magic != STORE_MAGIC {
            return Err(Error::corruption(
                "magic",
                format!("expected {STORE_MAGIC:?}, got {magic:?}"),
            ));
        }
        let format = read_u32(r)?;
        if format != STORE_FORMAT_VERSION {
            return Err(Error::corruption(
                "format version",
                format!("unsupported store version {format}"),
            ));
        }
        let dim = read_u32(r)?;
        let bits = read_u32(r)?;
        let hash_computations = read_u64(r)?;
        let mut store = HashStore::new(dim, bits);
        store.hash_computations = hash_computations;

        let image_count = read_u64(r)?;
        let sig_bytes = byte_len(bits);
        for _ in 0..image_count {
            let mut key = [0u8; 16];
            r.read_exact(&mut key)?;
            let ref_count = read_u32(r)?;
            let mut features = Vec::with_capacity(dim as usize);
            for _ in 0..dim {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                features.push(f32::from_le_bytes(b));
            }
            let mut n = [0u8; 1];
            r.read_exact(&mut n)?;
            let mut hashes = Vec::with_capacity(n[0] as usize);
            for _ in 0..n[0] {
                let version = read_u32(r)?;
                let mut sig = vec![0u8; sig_bytes];
                r.read_exact(&mut sig)?;
                hashes.push((version, BinarySignature::from_bytes(bits, sig)?));
            }
            store.images.insert(
                key,
                ImageEntry {
                    ref_count,
                    features,
                    hashes,
                },
            );
        }

        let listing_count = read_u64(r)?;
        for _ in 0..listing_count {
            let id = read_u64(r)?;
            let category_id = read_u32(r)?;
            let timestamp = read_u64(r)?;
            let mut live = [0u8; 1];
            r.read_exact(&mut live)?;
            let mut key = [0u8; 16];
            r.read_exact(&mut key)?;
            let mut n = [0u8; 2];
            r.read_exact(&mut n)?;
            let mut aspects = AspectSet::new();
            for _ in 0..u16::from_le_bytes(n) {
                let name = read_str(r)?;
                let value = read_str(r)?;
                aspects.insert(Aspect::new(name, value));
            }
            store.listings.insert(
                id,
                ListingEntry {
                    category_id,
                    image_key: key,
                    aspects,
                    timestamp,
                    live: live[0] == 1,
                },
            );
        }
        Ok(store)
    }

    pub fn load_from_path(path: &Path) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        HashStore::load(&mut r)
    }
}

/// In-progress hash migration; stepping it one image at a time lets
/// tests interleave queries with the scan the way the production
/// parallel job interleaves with serving.
pub struct Rehash {
    pending: Vec<ImageKey>,
    pos: usize,
    projector: HashProjector,
}

impl Rehash {
    pub fn remaining(&self) -> usize {
        self.pending.len() - self.pos
    }

    /// Rehashes the next pending image; returns false when done.
    pub fn step(&mut self, store: &mut HashStore) -> Result<bool> {
        while self.pos < self.pending.len() {
            let key = self.pending[self.pos];
            self.pos += 1;
            // The image may have been deleted since the scan started.
            let Some(entry) = store.images.get(&key) else {
                continue;
            };
            if entry.hashes.iter().any(|(v, _)| *v == self.projector.version()) {
                continue;
            }
            let sig = self.projector.extract_hash(&entry.features)?;
            store.hash_computations += 1;
            let entry = store.images.get_mut(&key).unwrap();
            entry.hashes.push((self.projector.version(), sig));
            entry.hashes.sort_by_key(|(v, _)| *v);
            while entry.hashes.len() > 2 {
                entry.hashes.remove(0);
            }
            return Ok(true);
        }
        Ok(false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub category_id: CategoryId,
    pub record_count: u64,
    pub path: String,
}

pub const MANIFEST_MAGIC: &[u8; 8] = b"EBVSMAN1";

/// Result of one extract run; serialized as a fixed-layout binary file
/// and rendered as text for operators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractManifest {
    pub model_version: u32,
    pub total_scanned: u64,
    pub skipped_missing_hash: u64,
    pub entries: Vec<ManifestEntry>,
}

impl ExtractManifest {
    pub fn total_records(&self) -> u64 {
        self.entries.iter().map(|e| e.record_count).sum()
    }

    /// Layout (little-endian): magic "EBVSMAN1", u32 format version,
    /// u32 model version, u64 total scanned, u64 skipped, u32 entry
    /// count, entries as (u32 category, u64 records, u16 path length,
    /// path bytes).
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MANIFEST_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&self.model_version.to_le_bytes())?;
        w.write_all(&self.total_scanned.to_le_bytes())?;
        w.write_all(&self.skipped_missing_hash.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for e in &self.entries {
            w.write_all(&e.category_id.to_le_bytes())?;
            w.write_all(&e.record_count.to_le_bytes())?;
            write_str(w, &e.path)?;
        }
        Ok(())
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|e| Error::corruption("header length", e.to_string()))?;
        if &magic != MANIFEST_MAGIC {
            return Err(Error::corruption(
                "magic",
                format!("expected {MANIFEST_MAGIC:?}, got {magic:?}"),
            ));
        }
        let format = read_u32(r)?;
        if format != 1 {
            return Err(Error::corruption(
                "format version",
                format!("unsupported manifest version {format}"),
            ));
        }
        let model_version = read_u32(r)?;
        let total_scanned = read_u64(r)?;
        let skipped_missing_hash = read_u64(r)?;
        let count = read_u32(r)?;
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let category_id = read_u32(r)?;
            let record_count = read_u64(r)?;
            let path = read_str(r)?;
            entries.push(ManifestEntry {
                category_id,
                record_count,
                path,
            });
        }
        Ok(ExtractManifest {
            model_version,
            total_scanned,
            skipped_missing_hash,
            entries,
        })
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "extract manifest (model version {})\n\
             listings scanned: {}\n\
             skipped (missing hash): {}\n",
            self.model_version, self.total_scanned, self.skipped_missing_hash
        ));
        out.push_str("category  records  path\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{:<9} {:<8} {}\n",
                e.category_id, e.record_count, e.path
            ));
        }
        out
    }
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > usize::from(u16::MAX) {
        return Err(Error::invalid("string too long to serialize"));
    }
    w.write_all(&(bytes.len() as u16).to_le_bytes())?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let mut len = [0u8; 2];
    r.read_exact(&mut len)?;
    let mut buf = vec![0u8; usize::from(u16::from_le_bytes(len))];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::corruption("string encoding", e.to_string()))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
