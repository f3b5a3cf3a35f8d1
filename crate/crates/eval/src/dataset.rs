//! Synthetic class-clustered dataset generator standing in for the real
//! corpus: per-class Gaussian feature clouds, per-class aspect value
//! distributions, a train/validation split, and a listing-update stream
//! with a controlled exact-duplicate rate for the ingestion pipeline.
//!
//! Everything derives from one seed through ChaCha8 streams in a fixed
//! order, so regeneration is exact.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use visearch_core::featurize::embed_features;
use visearch_core::hash::FeatureVector;
use visearch_core::ingest::{ListingUpdate, UpdateOp};
use visearch_core::score::{Aspect, AspectSet};

use crate::error::{Error, Result};

pub const ASPECT_NAMES: [&str; 5] = ["brand", "color", "material", "price", "size"];

/// Probability that an item draws its class's preferred aspect value.
const PREFERRED_VALUE_PROB: f64 = 0.55;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub classes: u32,
    pub per_class: u32,
    pub dim: u32,
    /// Per-dimension Gaussian noise around the class centroid.
    pub sigma: f64,
    /// Noise for validation items; queries come from unconstrained
    /// photos, so they are allowed to be noisier than the catalog
    /// images they search against. `None` reuses `sigma`.
    pub query_sigma: Option<f64>,
    /// Scale of the class centroids; the intra/inter-class distance
    /// ratio follows sigma/separation.
    pub separation: f64,
    pub train_fraction: f64,
    /// Fraction of emitted listing updates reusing a previous listing's
    /// exact image bytes.
    pub duplicate_rate: f64,
    /// Values per aspect name.
    pub aspect_values: u32,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            classes: 10,
            per_class: 1000,
            dim: 128,
            sigma: 0.3,
            query_sigma: None,
            separation: 1.0,
            train_fraction: 0.9,
            duplicate_rate: 1.0 / 3.0,
            aspect_values: 6,
            seed: 7,
        }
    }
}

impl GenParams {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if self.per_class < 2 {
            return Err(Error::invalid("need at least 2 items per class"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be nonnegative"));
        }
        if let Some(q) = self.query_sigma {
            if q < 0.0 || !q.is_finite() {
                return Err(Error::invalid("query sigma must be nonnegative"));
            }
        }
        if self.separation < 0.0 || !self.separation.is_finite() {
            return Err(Error::invalid("separation must be nonnegative"));
        }
        let train = self.train_count();
        if train == 0 || train >= self.per_class as usize {
            return Err(Error::invalid(
                "train fraction must leave both splits nonempty",
            ));
        }
        if !(0.0..=1.0).contains(&self.duplicate_rate) {
            return Err(Error::invalid("duplicate rate must be in [0,1]"));
        }
        if self.aspect_values < 2 {
            return Err(Error::invalid("need at least 2 values per aspect"));
        }
        Ok(())
    }

    pub fn train_count(&self) -> usize {
        ((f64::from(self.per_class)) * self.train_fraction).floor() as usize
    }
}

#[derive(Clone, Debug)]
pub struct Item {
    pub listing_id: u64,
    pub category_id: u32,
    pub split: Split,
    pub features: FeatureVector,
    pub aspects: AspectSet,
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub params: GenParams,
    pub centroids: Vec<FeatureVector>,
    items: Vec<Item>,
    by_id: std::collections::BTreeMap<u64, usize>,
    category_ids: Vec<u32>,
}

impl SyntheticDataset {
    /// Deterministic generation from `params.seed`.
    pub fn generate(params: GenParams) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let dim = params.dim as usize;

        let centroids: Vec<FeatureVector> = (0..params.classes)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let z: f32 = StandardNormal.sample(&mut rng);
                        z * params.separation as f32
                    })
                    .collect()
            })
            .collect();

        let train_count = params.train_count();
        let query_sigma = params.query_sigma.unwrap_or(params.sigma);
        let mut items = Vec::with_capacity((params.classes * params.per_class) as usize);
        for class in 0..params.classes {
            for i in 0..params.per_class {
                let split = if (i as usize) < train_count {
                    Split::Train
                } else {
                    Split::Valid
                };
                let noise = match split {
                    Split::Train => params.sigma,
                    Split::Valid => query_sigma,
                };
                let features: FeatureVector = centroids[class as usize]
                    .iter()
                    .map(|c| {
                        let z: f32 = StandardNormal.sample(&mut rng);
                        c + z * noise as f32
                    })
                    .collect();
                let aspects = draw_aspects(&params, class, &mut rng);
                items.push(Item {
                    listing_id: items.len() as u64 + 1,
                    category_id: class,
                    split,
                    features,
                    aspects,
                });
            }
        }
        Ok(SyntheticDataset::assemble(params, centroids, items))
    }

    /// Builds a dataset from externally supplied items (the adapter for
    /// real feature files). Aspect-oracle corruption draws from the
    /// synthetic vocabulary, so it only makes sense for generated data.
    pub fn from_parts(dim: u32, items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("dataset needs at least one item"));
        }
        let mut categories: Vec<u32> = items.iter().map(|i| i.category_id).collect();
        categories.sort_unstable();
        categories.dedup();
        if categories.len() < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        for item in &items {
            if item.features.len() != dim as usize {
                return Err(Error::invalid(format!(
                    "listing {} has {} feature dims, expected {dim}",
                    item.listing_id,
                    item.features.len()
                )));
            }
        }
        if !items.iter().any(|i| i.split == Split::Train)
            || !items.iter().any(|i| i.split == Split::Valid)
        {
            return Err(Error::invalid("both splits must be nonempty"));
        }
        let params = GenParams {
            classes: categories.len() as u32,
            per_class: 2,
            dim,
            sigma: 0.0,
            query_sigma: None,
            separation: 0.0,
            train_fraction: 0.5,
            duplicate_rate: 0.0,
            aspect_values: 2,
            seed: 0,
        };
        Ok(SyntheticDataset::assemble(params, Vec::new(), items))
    }

    fn assemble(params: GenParams, centroids: Vec<FeatureVector>, items: Vec<Item>) -> Self {
        let by_id = items
            .iter()
            .enumerate()
            .map(|(idx, item)| (item.listing_id, idx))
            .collect();
        let mut category_ids: Vec<u32> = items.iter().map(|i| i.category_id).collect();
        category_ids.sort_unstable();
        category_ids.dedup();
        SyntheticDataset {
            params,
            centroids,
            items,
            by_id,
            category_ids,
        }
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn split_items(&self, split: Split) -> impl Iterator<Item = &Item> {
        self.items.iter().filter(move |i| i.split == split)
    }

    pub fn item(&self, listing_id: u64) -> Option<&Item> {
        self.by_id.get(&listing_id).map(|idx| &self.items[*idx])
    }

    pub fn categories(&self) -> Vec<u32> {
        self.category_ids.clone()
    }

    /// All values an aspect name can take in this dataset.
    pub fn aspect_values(&self, name: &str) -> Vec<String> {
        (0..self.params.aspect_values)
            .map(|j| format!("{name}{j}"))
            .collect()
    }

    /// Listing updates for one split in listing-id order, with
    /// `duplicate_rate` of the upserts reusing the exact image bytes of
    /// an earlier same-class listing. Image payloads embed the feature
    /// vector so the standard featurizer reproduces it.
    pub fn listing_updates(&self, split: Split) -> Vec<ListingUpdate> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed ^ 0x75706461_74657321);
        let mut prior_bytes: Vec<Vec<Vec<u8>>> = vec![Vec::new(); self.params.classes as usize];
        let mut updates = Vec::new();
        for item in self.split_items(split) {
            let class = item.category_id as usize;
            let duplicate = !prior_bytes[class].is_empty()
                && rng.random_bool(self.params.duplicate_rate);
            let image_bytes = if duplicate {
                let pick = rng.random_range(0..prior_bytes[class].len());
                prior_bytes[class][pick].clone()
            } else {
                let bytes = embed_features(&item.features, item.listing_id);
                prior_bytes[class].push(bytes.clone());
                bytes
            };
            updates.push(ListingUpdate {
                listing_id: item.listing_id,
                category_id: item.category_id,
                image_bytes,
                aspects: item.aspects.clone(),
                op: UpdateOp::Upsert,
                timestamp: item.listing_id,
            });
        }
        updates
    }
}

fn draw_aspects(params: &GenParams, class: u32, rng: &mut ChaCha8Rng) -> AspectSet {
    let mut set = AspectSet::new();
    for (idx, name) in ASPECT_NAMES.iter().enumerate() {
        let preferred = (class as usize + idx) % params.aspect_values as usize;
        let value = if rng.random_bool(PREFERRED_VALUE_PROB) {
            preferred
        } else {
            // Uniform over the remaining values.
            let mut v = rng.random_range(0..params.aspect_values as usize - 1);
            if v >= preferred {
                v += 1;
            }
            v
        };
        set.insert(Aspect::new(*name, format!("{name}{value}")));
    }
    set
}

/// Standard-normal feature rows; the isotropic corpus used by the bit
/// balance analysis.
pub fn isotropic_features(count: usize, dim: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

pub const FEATURE_MAGIC: &[u8; 8] = b"EBVSFEA1";

/// Binary feature file: magic, u32 format version, u32 dim, u64 count,
/// then count rows of dim little-endian f32.
pub fn write_features(path: &Path, dim: u32, rows: &[FeatureVector]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    for row in rows {
        if row.len() != dim as usize {
            return Err(Error::invalid("feature row has wrong dimension"));
        }
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<(u32, Vec<FeatureVector>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::corruption("header length", e.to_string()))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::corruption(
            "magic",
            format!("expected {FEATURE_MAGIC:?}, got {magic:?}"),
        ));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    if u32::from_le_bytes(u32buf) != 1 {
        return Err(Error::corruption("format version", "unsupported version"));
    }
    r.read_exact(&mut u32buf)?;
    let dim = u32::from_le_bytes(u32buf);
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf);
    let mut rows = Vec::with_capacity(count as usize);
    let mut row_bytes = vec![0u8; dim as usize * 4];
    for _ in 0..count {
        r.read_exact(&mut row_bytes)
            .map_err(|e| Error::corruption("row length", e.to_string()))?;
        rows.push(
            row_bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    Ok((dim, rows))
}

/// Text manifest of labels and aspects, one row per listing:
/// `listing_id<TAB>category_id<TAB>split<TAB>aspects`.
pub fn write_manifest(path: &Path, items: &[Item]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::from("# listing_id\tcategory_id\tsplit\taspects\n");
    for item in items {
        let aspects: Vec<String> = item
            .aspects
            .iter()
            .map(|a| format!("{}={}", a.name, a.value))
            .collect();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            item.listing_id,
            item.category_id,
            match item.split {
                Split::Train => "train",
                Split::Valid => "valid",
            },
            aspects.join(";"),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRow {
    pub listing_id: u64,
    pub category_id: u32,
    pub split: Split,
    pub aspects: AspectSet,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::corruption(
                "manifest row",
                format!("line {}: expected 4 fields", lineno + 1),
            ));
        }
        let listing_id = fields[0]
            .parse()
            .map_err(|_| Error::corruption("manifest row", format!("line {}", lineno + 1)))?;
        let category_id = fields[1]
            .parse()
            .map_err(|_| Error::corruption("manifest row", format!("line {}", lineno + 1)))?;
        let split = match fields[2] {
            "train" => Split::Train,
            "valid" => Split::Valid,
            other => {
                return Err(Error::corruption(
                    "manifest row",
                    format!("line {}: bad split {other:?}", lineno + 1),
                ))
            }
        };
        let mut aspects = AspectSet::new();
        if !fields[3].is_empty() {
            for pair in fields[3].split(';') {
                let (name, value) = pair.split_once('=').ok_or_else(|| {
                    Error::corruption("manifest row", format!("line {}: bad aspect", lineno + 1))
                })?;
                aspects.insert(Aspect::new(name, value));
            }
        }
        rows.push(ManifestRow {
            listing_id,
            category_id,
            split,
            aspects,
        });
    }
    Ok(rows)
}
