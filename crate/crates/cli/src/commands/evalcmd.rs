//! `visearch eval`: run the measurement protocol over a generated
//! dataset directory (regenerated exactly from its sidecar) or over
//! externally supplied feature files, and write metric reports.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use visearch_eval::report::{render_timings_text, timings_to_csv};
use visearch_eval::{
    dataset, EvalContext, Evaluator, Method, MetricReport, Split, SyntheticDataset,
};

use crate::config::Config;

#[derive(Args)]
pub struct EvalArgs {
    /// Dataset directory produced by `visearch gen` (defaults to the
    /// data root).
    #[arg(long)]
    data: Option<PathBuf>,

    /// External adapter: train feature file (with --valid-features and
    /// --manifest, replaces the generated dataset).
    #[arg(long, requires_all = ["valid_features", "manifest"])]
    train_features: Option<PathBuf>,

    #[arg(long)]
    valid_features: Option<PathBuf>,

    #[arg(long)]
    manifest: Option<PathBuf>,

    /// Tested top-N category counts for the supervised path.
    #[arg(long, default_value = "1,3,5,10")]
    n_grid: String,

    /// k' values for the k-means baseline.
    #[arg(long, default_value = "16,64,256")]
    kmeans: String,

    /// Baseline top-N clusters (paired with each k').
    #[arg(long, default_value_t = 5)]
    kmeans_n: usize,

    /// Ks at which metrics are computed.
    #[arg(long, default_value = "1,10,50,100")]
    k_grid: String,

    /// Validation queries to evaluate.
    #[arg(long, default_value_t = 600)]
    queries: usize,

    /// Include the cumulative-softmax prediction mode.
    #[arg(long, default_value_t = true)]
    cumulative: bool,

    /// Output directory (defaults to <data_root>/reports).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(config: &Config, args: EvalArgs) -> anyhow::Result<()> {
    let (ds, summary) = load_dataset(config, &args)?;
    let projector = config.projector()?;
    let ctx = EvalContext::build(&ds, &projector, config.file.model.temperature, args.queries)?;
    let query_count = ctx.queries.len();
    let mut evaluator = Evaluator::new(ctx, ds.params.seed);

    let k_grid = super::parse_usize_list(&args.k_grid)?;
    let n_grid = super::parse_usize_list(&args.n_grid)?;
    let ks = super::parse_u32_list(&args.kmeans)?;
    let m = config.file.search.m as usize;

    let mut methods = Vec::new();
    for n in &n_grid {
        methods.push(Method::Ours { n: *n, cumulative: false });
    }
    if args.cumulative {
        methods.push(Method::Ours {
            n: *n_grid.last().unwrap_or(&5),
            cumulative: true,
        });
    }
    for k in &ks {
        methods.push(Method::KMeans { k: *k, n: args.kmeans_n });
    }

    let mut reports = Vec::new();
    for method in &methods {
        eprintln!("evaluating {} ...", method.label());
        reports.push(evaluator.evaluate(*method, &k_grid, m)?);
    }

    let report = MetricReport {
        dataset_summary: summary,
        m,
        query_count,
        k_grid,
        methods: reports.clone(),
    };
    let out = args.out.unwrap_or_else(|| config.reports_dir());
    report.write_files(&out, "metrics")?;

    let timing_rows: Vec<visearch_eval::TimingRow> = reports
        .iter()
        .map(|r| visearch_eval::TimingRow {
            method: r.label.clone(),
            mean_ms: r.mean_query_ms,
            speedup_vs_exhaustive: None,
        })
        .collect();
    std::fs::write(out.join("eval_timings.txt"), render_timings_text(&timing_rows, 1))?;
    std::fs::write(out.join("eval_timings.csv"), timings_to_csv(&timing_rows))?;

    print!("{}", report.render_text());
    println!("reports written to {}", out.display());
    Ok(())
}

fn load_dataset(config: &Config, args: &EvalArgs) -> anyhow::Result<(SyntheticDataset, String)> {
    if let (Some(train), Some(valid), Some(manifest)) =
        (&args.train_features, &args.valid_features, &args.manifest)
    {
        let ds = load_external(train, valid, manifest)?;
        return Ok((
            ds,
            format!("external features {} / {}", train.display(), valid.display()),
        ));
    }
    let dir = args.data.clone().unwrap_or_else(|| config.data_root.clone());
    let params = super::read_dataset_params(&dir.join("dataset.toml"))?;
    let summary = format!(
        "{} classes x {} (dim {}, sigma {}, seed {})",
        params.classes, params.per_class, params.dim, params.sigma, params.seed
    );
    Ok((SyntheticDataset::generate(params)?, summary))
}

/// External-feature adapter: items are rebuilt from the manifest plus
/// the two feature files (rows in manifest order per split).
fn load_external(
    train: &PathBuf,
    valid: &PathBuf,
    manifest: &PathBuf,
) -> anyhow::Result<SyntheticDataset> {
    let rows = dataset::read_manifest(manifest)?;
    let (dim_t, train_rows) = dataset::read_features(train)?;
    let (dim_v, valid_rows) = dataset::read_features(valid)?;
    if dim_t != dim_v {
        bail!("train and valid feature files disagree on dimension");
    }
    let mut items = Vec::with_capacity(rows.len());
    let (mut ti, mut vi) = (0usize, 0usize);
    for row in &rows {
        let features = match row.split {
            Split::Train => {
                let f = train_rows
                    .get(ti)
                    .context("manifest has more train rows than train features")?;
                ti += 1;
                f.clone()
            }
            Split::Valid => {
                let f = valid_rows
                    .get(vi)
                    .context("manifest has more valid rows than valid features")?;
                vi += 1;
                f.clone()
            }
        };
        items.push(dataset::Item {
            listing_id: row.listing_id,
            category_id: row.category_id,
            split: row.split,
            features,
            aspects: row.aspects.clone(),
        });
    }
    if ti != train_rows.len() || vi != valid_rows.len() {
        bail!("feature files hold more rows than the manifest describes");
    }
    Ok(SyntheticDataset::from_parts(dim_t, items)?)
}
