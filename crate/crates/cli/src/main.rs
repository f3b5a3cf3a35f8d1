//! `visearch`: one binary driving the whole pipeline -- synthetic data
//! generation, ingestion, index extracts, serving nodes, queries and the
//! evaluation/benchmark harness.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// Process exit codes: 0 success, 1 generic failure, 2 configuration
/// error, 3 data corruption, 4 cluster unavailable.
pub const EXIT_GENERIC: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CORRUPTION: u8 = 3;
pub const EXIT_CLUSTER: u8 = 4;

#[derive(Parser)]
#[command(name = "visearch", version, about = "Desk-scale visual search backend")]
struct Cli {
    /// Path to the TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Data root override (also VISEARCH_DATA_ROOT).
    #[arg(long, global = true)]
    data_root: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (features, manifest, updates stream).
    Gen(commands::gen::GenArgs),
    /// Apply a listing update stream to the hash store.
    Ingest(commands::ingest::IngestArgs),
    /// Write per-category index extracts from the hash store.
    Extract(commands::extract::ExtractArgs),
    /// Run a cluster node serving the query wire protocol.
    Serve(commands::serve::ServeArgs),
    /// Issue a query against a serving node.
    Query(commands::query::QueryArgs),
    /// Run the retrieval evaluation protocol and write metric reports.
    Eval(commands::evalcmd::EvalArgs),
    /// Measure per-query search time across methods.
    Bench(commands::bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match Config::load(cli.config.as_deref(), cli.data_root.as_deref()) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => commands::gen::run(&config, args),
        Command::Ingest(args) => commands::ingest::run(&config, args),
        Command::Extract(args) => commands::extract::run(&config, args),
        Command::Serve(args) => commands::serve::run(&config, args),
        Command::Query(args) => commands::query::run(&config, args),
        Command::Eval(args) => commands::evalcmd::run(&config, args),
        Command::Bench(args) => commands::bench::run(&config, args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

/// Maps error chains onto the documented exit codes.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<visearch_core::Error>() {
            return match e {
                visearch_core::Error::Config(_) => EXIT_CONFIG,
                visearch_core::Error::Corruption { .. } => EXIT_CORRUPTION,
                _ => EXIT_GENERIC,
            };
        }
        if let Some(e) = cause.downcast_ref::<visearch_ranker::Error>() {
            return match e {
                visearch_ranker::Error::Config(_) => EXIT_CONFIG,
                visearch_ranker::Error::ClusterUnavailable(_) => EXIT_CLUSTER,
                visearch_ranker::Error::Protocol { .. } => EXIT_CORRUPTION,
                _ => EXIT_GENERIC,
            };
        }
        if let Some(e) = cause.downcast_ref::<visearch_cluster::Error>() {
            return match e {
                visearch_cluster::Error::Unavailable(_) => EXIT_CLUSTER,
                visearch_cluster::Error::Protocol { .. } => EXIT_CORRUPTION,
                _ => EXIT_GENERIC,
            };
        }
        if let Some(e) = cause.downcast_ref::<visearch_eval::Error>() {
            return match e {
                visearch_eval::Error::Corruption { .. } => EXIT_CORRUPTION,
                _ => EXIT_GENERIC,
            };
        }
    }
    EXIT_GENERIC
}
