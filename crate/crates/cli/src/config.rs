//! Operator configuration: a TOML file with environment and flag
//! overrides. Everything a node or batch command needs to agree on
//! (signature width, model seed, scoring weights, cluster wiring) lives
//! here; per-run knobs stay on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;

use visearch_core::score::{AspectWeights, ScoringConfig};
use visearch_core::HashProjector;
use visearch_ranker::SearchConfig;

pub const DATA_ROOT_ENV: &str = "VISEARCH_DATA_ROOT";
pub const QUERY_ADDR_ENV: &str = "VISEARCH_QUERY_ADDR";
pub const MEMBER_ADDR_ENV: &str = "VISEARCH_MEMBER_ADDR";

#[derive(Clone, Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data_root: Option<PathBuf>,
    #[serde(default)]
    pub signature: SignatureSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub scoring: ScoringSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub cluster: ClusterSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureSection {
    pub bits: u32,
}

impl Default for SignatureSection {
    fn default() -> Self {
        SignatureSection { bits: 4096 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    pub dim: u32,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection { dim: 128 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub seed: u64,
    pub version: u32,
    /// Softmax temperature of the category surrogate.
    pub temperature: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            seed: 20260809,
            version: 1,
            temperature: 40.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringSection {
    pub lambda: f64,
    pub default_weight: f64,
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl Default for ScoringSection {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        for name in ["size", "brand", "price"] {
            weights.insert(name.to_string(), 3.0);
        }
        ScoringSection {
            lambda: 0.75,
            default_weight: 1.0,
            weights,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    /// Per-category fetch size (M).
    pub m: u32,
    /// Final result count (N).
    pub n: usize,
    /// Sub-partitions scanned concurrently per partition (W).
    pub workers: usize,
    pub query_timeout_ms: u64,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            m: 50,
            n: 50,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            query_timeout_ms: 500,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub members_file: Option<PathBuf>,
    pub heartbeat_ms: u64,
    pub missed_heartbeats: u32,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            members_file: None,
            heartbeat_ms: 1000,
            missed_heartbeats: 3,
        }
    }
}

/// Resolved configuration after file, environment and flag merging.
#[derive(Clone, Debug)]
pub struct Config {
    pub data_root: PathBuf,
    pub file: ConfigFile,
}

impl Config {
    pub fn load(config_path: Option<&Path>, data_root_flag: Option<&Path>) -> anyhow::Result<Self> {
        let file = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config file {}", path.display()))?;
                toml::from_str::<ConfigFile>(&text)
                    .with_context(|| format!("cannot parse config file {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let data_root = data_root_flag
            .map(|p| p.to_path_buf())
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .or_else(|| file.data_root.clone())
            .unwrap_or_else(|| PathBuf::from("data"));

        let config = Config { data_root, file };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.file.signature.bits == 0 {
            bail!("signature.bits must be positive");
        }
        if self.file.features.dim == 0 {
            bail!("features.dim must be positive");
        }
        if !(0.0..=1.0).contains(&self.file.scoring.lambda) {
            bail!("scoring.lambda must be in [0,1]");
        }
        if self.file.search.m == 0 || self.file.search.n == 0 || self.file.search.workers == 0 {
            bail!("search.m, search.n and search.workers must be positive");
        }
        if self.file.model.temperature <= 0.0 {
            bail!("model.temperature must be positive");
        }
        Ok(())
    }

    pub fn bits(&self) -> u32 {
        self.file.signature.bits
    }

    pub fn dim(&self) -> u32 {
        self.file.features.dim
    }

    /// Loads the projector descriptor if present under the data root,
    /// otherwise regenerates from the configured seed.
    pub fn projector(&self) -> anyhow::Result<HashProjector> {
        let path = self.projector_path();
        if path.exists() {
            let mut file = std::fs::File::open(&path)?;
            let projector = HashProjector::load_descriptor(&mut file)
                .with_context(|| format!("cannot load projector {}", path.display()))?;
            if projector.bits() != self.bits() || projector.dim() != self.dim() {
                bail!(
                    "projector {} is {}x{} but config expects {}x{}",
                    path.display(),
                    projector.bits(),
                    projector.dim(),
                    self.bits(),
                    self.dim()
                );
            }
            return Ok(projector);
        }
        Ok(HashProjector::new(
            self.file.model.seed,
            self.file.model.version,
            self.bits(),
            self.dim(),
        )?)
    }

    pub fn projector_path(&self) -> PathBuf {
        self.data_root.join("projector.hmpj")
    }

    pub fn store_path(&self) -> PathBuf {
        self.data_root.join("store.ebvs")
    }

    pub fn index_root(&self) -> PathBuf {
        self.data_root.join("index")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.data_root.join("reports")
    }

    pub fn members_path(&self) -> Option<PathBuf> {
        self.file.cluster.members_file.as_ref().map(|p| {
            if p.is_absolute() {
                p.clone()
            } else {
                self.data_root.join(p)
            }
        })
    }

    pub fn scoring_config(&self) -> anyhow::Result<ScoringConfig> {
        Ok(ScoringConfig::new(self.file.scoring.lambda, self.bits())?)
    }

    pub fn aspect_weights(&self) -> anyhow::Result<AspectWeights> {
        Ok(AspectWeights::new(
            self.file.scoring.weights.clone(),
            self.file.scoring.default_weight,
        )?)
    }

    pub fn search_config(&self) -> anyhow::Result<SearchConfig> {
        Ok(SearchConfig {
            workers: self.file.search.workers,
            per_node_timeout: Duration::from_millis(self.file.search.query_timeout_ms),
            scoring: self.scoring_config()?,
            aspect_weights: self.aspect_weights()?,
            per_category: self.file.search.m,
            final_n: self.file.search.n,
        })
    }
}
