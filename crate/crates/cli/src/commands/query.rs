//! `visearch query`: issue one query against a serving node and print
//! the ranked listing table with a stage latency breakdown. The query
//! hash comes from a hex literal, an indexed listing (anchor style) or a
//! feature-file row (hashed locally, categories predicted).

use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::Args;

use visearch_cluster::discovery::{Discovery, FileDiscovery};
use visearch_core::hash::PredictMode;
use visearch_core::sig::byte_len;
use visearch_core::CategoryModel;
use visearch_eval::{dataset, Split};
use visearch_ranker::server::remote_query;
use visearch_ranker::IndexDirLoader;
use visearch_ranker::PartitionLoader;

use crate::config::Config;

#[derive(Args)]
pub struct QueryArgs {
    /// Serving node address; defaults to the first member's query
    /// address.
    #[arg(long)]
    addr: Option<String>,

    /// Query hash as hex (1024 chars at the default width).
    #[arg(long)]
    hash: Option<String>,

    /// Use an indexed listing's stored hash as the query (anchor
    /// search).
    #[arg(long)]
    listing: Option<u64>,

    /// Feature file to read a query row from.
    #[arg(long)]
    features: Option<PathBuf>,

    /// Row within --features.
    #[arg(long, default_value_t = 0)]
    row: usize,

    /// Categories to search; defaults to predictions (feature queries)
    /// or every indexed category.
    #[arg(long)]
    categories: Option<String>,

    /// Top predicted categories for feature queries.
    #[arg(long, default_value_t = 5)]
    top_categories: usize,

    /// Results requested per category (wire N).
    #[arg(short = 'n', long)]
    n: Option<u32>,

    #[arg(long, default_value_t = false)]
    rerank: bool,

    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
}

pub fn run(config: &Config, args: QueryArgs) -> anyhow::Result<()> {
    let version = config.file.model.version;
    let loader = IndexDirLoader::new(config.index_root(), version);

    let total_start = Instant::now();
    let predict_start = Instant::now();
    let mut predicted: Vec<u32> = Vec::new();
    let hash: Vec<u8> = if let Some(hex) = &args.hash {
        visearch_core::stream::hex_decode(hex)?
    } else if let Some(listing) = args.listing {
        lookup_indexed_hash(&loader, listing)?
    } else if let Some(path) = &args.features {
        let (dim, rows) = dataset::read_features(path)?;
        if dim != config.dim() {
            bail!("feature file is {dim}-dimensional, config expects {}", config.dim());
        }
        let row = rows
            .get(args.row)
            .with_context(|| format!("row {} out of range ({} rows)", args.row, rows.len()))?;
        let projector = config.projector()?;
        let signature = projector.extract_hash(row)?;
        let model = category_model(config)?;
        predicted = model
            .predict(row, PredictMode::AbsoluteTopN(args.top_categories))?
            .ranked
            .iter()
            .map(|(c, _)| *c)
            .collect();
        signature.into_bytes()
    } else {
        bail!("one of --hash, --listing or --features is required");
    };
    if hash.len() != byte_len(config.bits()) {
        bail!(
            "query hash is {} bytes, config expects {}",
            hash.len(),
            byte_len(config.bits())
        );
    }
    let predict_ms = predict_start.elapsed().as_secs_f64() * 1e3;

    let categories: Vec<u32> = match &args.categories {
        Some(text) => super::parse_u32_list(text)?,
        None if !predicted.is_empty() => predicted,
        None => loader.categories()?,
    };
    if categories.is_empty() {
        bail!("no categories to search");
    }

    let addr = match &args.addr {
        Some(addr) => addr.clone(),
        None => {
            let members_path = config
                .members_path()
                .context("either --addr or cluster.members_file is required")?;
            let records = FileDiscovery::new(&members_path).poll()?;
            records
                .first()
                .context("members file is empty")?
                .query_addr
                .clone()
        }
    };

    let n = args.n.unwrap_or(config.file.search.m);
    let request_id = std::process::id() as u64;
    let search_start = Instant::now();
    let response = remote_query(
        &addr,
        request_id,
        &hash,
        &categories,
        n,
        args.rerank,
        Duration::from_millis(args.timeout_ms),
    )?;
    let search_ms = search_start.elapsed().as_secs_f64() * 1e3;

    println!(
        "{} results from {addr} (degraded: {})",
        response.results.len(),
        response.degraded
    );
    println!(
        "{:<5} {:<12} {:<9} {:<8} {:>10} {:>9} {:>9}",
        "rank", "listing", "category", "hamming", "s_appear", "s_aspect", "s_final"
    );
    for (rank, r) in response.results.iter().enumerate() {
        println!(
            "{:<5} {:<12} {:<9} {:<8} {:>10.4} {:>9.4} {:>9.4}",
            rank + 1,
            r.listing_id,
            r.category_id,
            r.hamming,
            r.s_appearance,
            r.s_aspect,
            r.s_final
        );
    }
    println!(
        "latency: hash/predict {predict_ms:.2} ms, fanout+merge+rerank {search_ms:.2} ms, \
         total {:.2} ms",
        total_start.elapsed().as_secs_f64() * 1e3
    );
    Ok(())
}

/// Finds a listing's stored hash by scanning the version's index files.
fn lookup_indexed_hash(loader: &IndexDirLoader, listing: u64) -> anyhow::Result<Vec<u8>> {
    for category in loader.categories()? {
        let partition = loader.load(category, 0, 1)?;
        if let Ok(i) = partition.listing_ids().binary_search(&listing) {
            return Ok(partition.signature_at(i).to_vec());
        }
    }
    bail!("listing {listing} not found in any index file");
}

/// Rebuilds the category surrogate from the generated dataset files.
fn category_model(config: &Config) -> anyhow::Result<CategoryModel> {
    let manifest = dataset::read_manifest(&config.data_root.join("manifest.tsv"))?;
    let (dim, train) = dataset::read_features(&config.data_root.join("train.feat"))?;
    let labels: Vec<u32> = manifest
        .iter()
        .filter(|r| r.split == Split::Train)
        .map(|r| r.category_id)
        .collect();
    if labels.len() != train.len() {
        bail!("manifest train rows ({}) do not match train.feat ({})", labels.len(), train.len());
    }
    Ok(CategoryModel::fit(
        dim as usize,
        labels.into_iter().zip(train),
        config.file.model.temperature,
    )?)
}
