//! `qd`: run, batch, inspect, and compare quality-diversity runs.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Process exit codes. Documented in the README.
pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_BACKEND: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "qd", version, about = "Quality-diversity prompt-embedding evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded run and write its outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override (defaults to the config's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Backend override: synthetic or remote.
        #[arg(long)]
        backend: Option<String>,
        /// Budget override.
        #[arg(long)]
        budget: Option<u64>,
        /// Write a checkpoint every N iterations.
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Resume from a checkpoint file instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run a seed range as isolated processes, one output dir per seed.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// Seed range `lo..hi` (half-open) or `lo-hi` (inclusive).
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        /// Parallel worker processes.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Query an archive snapshot.
    Inspect {
        /// Snapshot JSONL (its sidecar is resolved from the meta record).
        #[arg(long)]
        archive: PathBuf,
        /// `cell:<index>`, `top-k:<k>`, or `paradigm-histogram`.
        #[arg(long)]
        query: String,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Compare two batch directories into a ComparisonReport JSON.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bootstrap resamples for the median CIs.
        #[arg(long, default_value_t = 1000)]
        n_bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate coverage dynamics from batch run logs into a CSV.
    ExportDynamics {
        /// Batch directory holding seed-*/runlog.csv.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a config file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            backend,
            budget,
            checkpoint_every,
            resume,
            quiet,
        } => commands::run(commands::RunArgs {
            config,
            seed,
            out,
            backend,
            budget,
            checkpoint_every,
            resume,
            quiet,
        }),
        Command::Batch {
            config,
            seeds,
            out,
            jobs,
            backend,
            budget,
            quiet,
        } => commands::batch(config, &seeds, out, jobs, backend, budget, quiet),
        Command::Inspect { archive, query, json } => commands::inspect(archive, &query, json),
        Command::Compare {
            a,
            b,
            out,
            n_bootstrap,
            seed,
        } => commands::compare(a, b, out, n_bootstrap, seed),
        Command::ExportDynamics { runs, out } => commands::export_dynamics(runs, out),
        Command::ValidateConfig { config } => commands::validate_config(config),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
