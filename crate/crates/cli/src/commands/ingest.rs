//! `visearch ingest`: parse a listing update stream and apply it to the
//! hash store in one micro-batch, printing dedup statistics.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use visearch_core::featurize::StandardFeaturizer;
use visearch_core::ingest::HashStore;
use visearch_core::stream::parse_update_line;

use crate::config::Config;

#[derive(Args)]
pub struct IngestArgs {
    /// Newline-delimited update records.
    #[arg(long)]
    updates: PathBuf,

    /// Store snapshot path (defaults to <data_root>/store.ebvs).
    #[arg(long)]
    store: Option<PathBuf>,
}

pub fn run(config: &Config, args: IngestArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.updates)
        .with_context(|| format!("cannot read updates {}", args.updates.display()))?;
    let mut updates = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        match parse_update_line(line) {
            Ok(update) => updates.push(update),
            Err(err) => bail!(
                "{}:{}: malformed update ({err}); batch aborted",
                args.updates.display(),
                lineno + 1
            ),
        }
    }

    let store_path = args.store.unwrap_or_else(|| config.store_path());
    let mut store = if store_path.exists() {
        HashStore::load_from_path(&store_path)?
    } else {
        HashStore::new(config.dim(), config.bits())
    };
    let projector = config.projector()?;
    let featurizer = StandardFeaturizer::new(config.dim());

    let before_hashes = store.hash_computations();
    let counts = store.ingest_batch(&updates, &projector, &featurizer)?;
    store.save_to_path(&store_path)?;

    println!("applied {} updates", updates.len());
    println!(
        "new images hashed:  {} (hash computations this run: {})",
        counts.new_images_hashed,
        store.hash_computations() - before_hashes
    );
    println!("duplicates linked:  {}", counts.duplicates_linked);
    println!("deletions:          {}", counts.deletions);
    println!("unchanged upserts:  {}", counts.unchanged);
    println!("warnings:           {}", counts.warnings);
    println!("stale skipped:      {}", counts.stale_skipped);
    println!(
        "store: {} live listings over {} unique images -> {}",
        store.live_listing_count(),
        store.image_count(),
        store_path.display()
    );
    Ok(())
}
