//! `visearch extract`: write per-category index files for one model
//! version from the hash store, plus the binary and text manifests.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;

use visearch_core::ingest::HashStore;

use crate::config::Config;

#[derive(Args)]
pub struct ExtractArgs {
    /// Model version to extract (defaults to the configured version).
    #[arg(long)]
    version: Option<u32>,

    /// Comma-separated supported category ids; defaults to every
    /// category with live listings.
    #[arg(long)]
    categories: Option<String>,

    #[arg(long)]
    store: Option<PathBuf>,

    /// Index root (defaults to <data_root>/index).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(config: &Config, args: ExtractArgs) -> anyhow::Result<()> {
    let store_path = args.store.unwrap_or_else(|| config.store_path());
    let store = HashStore::load_from_path(&store_path)
        .with_context(|| format!("cannot load store {}", store_path.display()))?;
    let version = args.version.unwrap_or(config.file.model.version);

    let live_categories: BTreeSet<u32> =
        store.live_listings().map(|(_, l)| l.category_id).collect();
    let supported: BTreeSet<u32> = match &args.categories {
        Some(text) => super::parse_u32_list(text)?.into_iter().collect(),
        None => live_categories.clone(),
    };
    let omitted: Vec<u32> = live_categories.difference(&supported).copied().collect();
    if !omitted.is_empty() {
        eprintln!(
            "warning: {} live categories outside the supported set omitted: {omitted:?}",
            omitted.len()
        );
    }

    let index_root = args.out.unwrap_or_else(|| config.index_root());
    let manifest = store.run_extract(version, &supported, &index_root)?;

    let manifest_dir = index_root.join(version.to_string());
    std::fs::create_dir_all(&manifest_dir)?;
    let mut bin = std::fs::File::create(manifest_dir.join("manifest.bin"))?;
    manifest.save(&mut bin)?;
    std::fs::write(manifest_dir.join("manifest.txt"), manifest.render_text())?;

    print!("{}", manifest.render_text());
    println!(
        "total records: {} ({} listings scanned)",
        manifest.total_records(),
        manifest.total_scanned
    );
    Ok(())
}
