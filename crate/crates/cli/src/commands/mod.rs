pub mod bench;
pub mod evalcmd;
pub mod extract;
pub mod gen;
pub mod ingest;
pub mod query;
pub mod serve;

use std::path::Path;

use anyhow::Context;
use visearch_eval::GenParams;

/// Sidecar describing how a dataset directory was generated; lets eval
/// and bench regenerate the exact corpus.
pub fn write_dataset_params(path: &Path, params: &GenParams) -> anyhow::Result<()> {
    let query_sigma = params.query_sigma.unwrap_or(params.sigma);
    let text = format!(
        "classes = {}\nper_class = {}\ndim = {}\nsigma = {}\nquery_sigma = {}\n\
         separation = {}\ntrain_fraction = {}\nduplicate_rate = {}\n\
         aspect_values = {}\nseed = {}\n",
        params.classes,
        params.per_class,
        params.dim,
        params.sigma,
        query_sigma,
        params.separation,
        params.train_fraction,
        params.duplicate_rate,
        params.aspect_values,
        params.seed,
    );
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_dataset_params(path: &Path) -> anyhow::Result<GenParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset params {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text)
        .with_context(|| format!("cannot parse dataset params {}", path.display()))?;
    let int = |key: &str| -> anyhow::Result<i64> {
        table
            .get(key)
            .and_then(|v| v.as_integer())
            .with_context(|| format!("{key} missing from {}", path.display()))
    };
    let float = |key: &str| -> anyhow::Result<f64> {
        table
            .get(key)
            .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
            .with_context(|| format!("{key} missing from {}", path.display()))
    };
    Ok(GenParams {
        classes: int("classes")? as u32,
        per_class: int("per_class")? as u32,
        dim: int("dim")? as u32,
        sigma: float("sigma")?,
        query_sigma: Some(float("query_sigma")?),
        separation: float("separation")?,
        train_fraction: float("train_fraction")?,
        duplicate_rate: float("duplicate_rate")?,
        aspect_values: int("aspect_values")? as u32,
        seed: int("seed")? as u64,
    })
}

pub fn parse_u32_list(text: &str) -> anyhow::Result<Vec<u32>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .with_context(|| format!("bad number {s:?}"))
        })
        .collect()
}

pub fn parse_usize_list(text: &str) -> anyhow::Result<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad number {s:?}"))
        })
        .collect()
}
