//! `visearch bench`: per-query search timing across methods, with the
//! storage-arithmetic section in the report.

use std::path::PathBuf;

use clap::Args;

use visearch_eval::report::{render_timings_text, storage_arithmetic_text, timings_to_csv};
use visearch_eval::{bench_timing, EvalContext, Evaluator, Method, SyntheticDataset};

use crate::config::Config;

#[derive(Args)]
pub struct BenchArgs {
    /// Dataset directory produced by `visearch gen` (defaults to the
    /// data root).
    #[arg(long)]
    data: Option<PathBuf>,

    /// Top-N category counts to time for the supervised path.
    #[arg(long, default_value = "1,5,10")]
    n_grid: String,

    /// k' values for the k-means baseline (empty to skip).
    #[arg(long, default_value = "")]
    kmeans: String,

    #[arg(long, default_value_t = 5)]
    kmeans_n: usize,

    /// Also time the full exhaustive scan.
    #[arg(long, default_value_t = true)]
    exhaustive: bool,

    #[arg(long, default_value_t = 3)]
    repetitions: usize,

    #[arg(long, default_value_t = 50)]
    queries: usize,

    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(config: &Config, args: BenchArgs) -> anyhow::Result<()> {
    let dir = args.data.clone().unwrap_or_else(|| config.data_root.clone());
    let params = super::read_dataset_params(&dir.join("dataset.toml"))?;
    let ds = SyntheticDataset::generate(params)?;
    let projector = config.projector()?;
    let ctx = EvalContext::build(&ds, &projector, config.file.model.temperature, args.queries)?;
    let mut evaluator = Evaluator::new(ctx, ds.params.seed);

    let mut methods = Vec::new();
    for n in super::parse_usize_list(&args.n_grid)? {
        methods.push(Method::Ours { n, cumulative: false });
    }
    for k in super::parse_u32_list(&args.kmeans)? {
        methods.push(Method::KMeans { k, n: args.kmeans_n });
    }
    if args.exhaustive {
        methods.push(Method::Exhaustive);
    }

    let m = config.file.search.m as usize;
    let rows = bench_timing(&mut evaluator, &methods, args.repetitions, m, 100)?;

    let mut text = render_timings_text(&rows, args.repetitions);
    text.push('\n');
    text.push_str(&storage_arithmetic_text());

    let out = args.out.unwrap_or_else(|| config.reports_dir());
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("timings.txt"), &text)?;
    std::fs::write(out.join("timings.csv"), timings_to_csv(&rows))?;
    print!("{text}");
    println!("reports written to {}", out.display());
    Ok(())
}
