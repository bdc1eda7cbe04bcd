use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coordmine::commands::{self, Context};
use coordmine::config::{Overrides, RunConfig};
use coordmine::{CliError, CliResult};
use coordmine_core::miner::ThresholdSide;

/// Coordinated-account detection by closed contrast pattern mining.
#[derive(Debug, Parser)]
#[command(name = "coordmine", version)]
struct Cli {
    /// Run config (TOML). Without it the built-in defaults apply.
    #[arg(long, global = true, env = "COORDMINE_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, env = "COORDMINE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "COORDMINE_THREADS")]
    threads: Option<usize>,
    /// Leave `generated_at` out of JSON reports.
    #[arg(long, global = true, env = "COORDMINE_NO_TIMESTAMP")]
    no_timestamp: bool,
    /// Minimum support count; overrides `mining.sigma`.
    #[arg(long, global = true, env = "COORDMINE_SIGMA")]
    sigma: Option<u64>,
    /// Minimum growth rate, e.g. `1.5` or `3/2`; overrides `mining.rho`.
    #[arg(long, global = true, env = "COORDMINE_RHO")]
    rho: Option<String>,
    /// Window the support threshold applies to: `background` or `target`.
    #[arg(long, global = true, env = "COORDMINE_THRESHOLD_SIDE")]
    threshold_side: Option<ThresholdSide>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, partition, filter and encode the posts.
    Ingest,
    /// Mine closed contrast patterns from the encoded datasets.
    Mine,
    /// Extract suspicious users from the mined patterns.
    Detect,
    /// Score detection and baselines against the labels.
    Eval,
    /// F1 over the sigma x rho grid.
    Sweep,
    /// Greedy attribute ablation.
    Ablate,
    /// Purity of behavioural patterns.
    Purity,
    /// Generate a labelled synthetic corpus.
    Synth,
    /// ingest, mine, detect, and with labels eval, purity and sweep.
    RunAll,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let overrides = Overrides {
        out: cli.out,
        sigma: cli.sigma,
        rho: cli.rho,
        threshold_side: cli.threshold_side,
    };
    let config = match &cli.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::defaults(&overrides)?,
    };
    let ctx = Context {
        config,
        timestamp: !cli.no_timestamp,
    };
    match cli.command {
        Command::Ingest => commands::ingest(&ctx).map(drop),
        Command::Mine => commands::mine(&ctx).map(drop),
        Command::Detect => commands::detect(&ctx).map(drop),
        Command::Eval => commands::eval(&ctx).map(drop),
        Command::Sweep => commands::sweep(&ctx).map(drop),
        Command::Ablate => commands::ablation(&ctx).map(drop),
        Command::Purity => commands::purity(&ctx).map(drop),
        Command::Synth => commands::synth(&ctx).map(drop),
        Command::RunAll => commands::run_all(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("coordmine: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
