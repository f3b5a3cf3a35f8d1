//! `visearch gen`: synthetic dataset files under the data root --
//! feature files for both splits, the label/aspect manifest, the listing
//! update stream for ingestion, the projector descriptor and the
//! generation sidecar.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use visearch_core::stream::format_update_line;
use visearch_eval::{dataset, GenParams, Split, SyntheticDataset};

use crate::config::Config;

#[derive(Args)]
pub struct GenArgs {
    /// Output directory (defaults to the data root).
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value_t = 10)]
    classes: u32,

    #[arg(long, default_value_t = 1000)]
    per_class: u32,

    #[arg(long, default_value_t = 0.3)]
    sigma: f64,

    /// Noise for validation (query) items; defaults to --sigma.
    #[arg(long)]
    query_sigma: Option<f64>,

    #[arg(long, default_value_t = 1.0)]
    separation: f64,

    #[arg(long, default_value_t = 0.9)]
    train_fraction: f64,

    #[arg(long, default_value_t = 1.0 / 3.0)]
    duplicate_rate: f64,

    #[arg(long, default_value_t = 6)]
    aspect_values: u32,

    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Skip the (large) listing update stream.
    #[arg(long)]
    no_updates: bool,
}

pub fn run(config: &Config, args: GenArgs) -> anyhow::Result<()> {
    let out = args.out.clone().unwrap_or_else(|| config.data_root.clone());
    std::fs::create_dir_all(&out)
        .with_context(|| format!("cannot create output dir {}", out.display()))?;

    let params = GenParams {
        classes: args.classes,
        per_class: args.per_class,
        dim: config.dim(),
        sigma: args.sigma,
        query_sigma: args.query_sigma,
        separation: args.separation,
        train_fraction: args.train_fraction,
        duplicate_rate: args.duplicate_rate,
        aspect_values: args.aspect_values,
        seed: args.seed,
    };
    let ds = SyntheticDataset::generate(params.clone())?;

    let train: Vec<_> = ds
        .split_items(Split::Train)
        .map(|i| i.features.clone())
        .collect();
    let valid: Vec<_> = ds
        .split_items(Split::Valid)
        .map(|i| i.features.clone())
        .collect();
    dataset::write_features(&out.join("train.feat"), params.dim, &train)?;
    dataset::write_features(&out.join("valid.feat"), params.dim, &valid)?;
    dataset::write_manifest(&out.join("manifest.tsv"), ds.items())?;
    super::write_dataset_params(&out.join("dataset.toml"), &params)?;

    let projector = config.projector()?;
    let mut file = std::fs::File::create(out.join("projector.hmpj"))?;
    projector.save_descriptor(&mut file)?;

    if !args.no_updates {
        let updates = ds.listing_updates(Split::Train);
        let mut text = String::new();
        for update in &updates {
            text.push_str(&format_update_line(update)?);
            text.push('\n');
        }
        std::fs::write(out.join("updates.tsv"), text)?;
        println!("updates: {} lines (train split)", updates.len());
    }

    println!(
        "dataset: {} classes x {} items (dim {}), {} train / {} valid rows",
        params.classes,
        params.per_class,
        params.dim,
        train.len(),
        valid.len()
    );
    println!("manifest rows: {}", ds.items().len());
    println!("wrote {}", out.display());
    Ok(())
}
