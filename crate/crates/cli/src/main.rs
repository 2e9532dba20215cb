//! `grst`: ingest, fit, build, price, bench and export.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "grst",
    version,
    about = "Gaussian recombining split tree workbench"
)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set tree.k=5
    #[arg(long = "set", global = true, value_name = "K=V")]
    overrides: Vec<String>,

    /// Seed for randomised stages (overrides em.seed)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 gives bit-stable output
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output path (a directory for export)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample a tick CSV onto the session grid and scale it
    Ingest,
    /// Fit a diagonal Gaussian mixture to displacement features
    Fit,
    /// Build one tree per mixture component (or from a schedule file)
    Build,
    /// Price a contract on a built mixture
    Price,
    /// Convergence report of every tree against its closed form
    Bench,
    /// Write DOT files for every component of a mixture
    Export,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest => commands::ingest(&cfg, out),
        Command::Fit => commands::fit(&cfg, cli.seed, out),
        Command::Build => commands::build(&cfg, out),
        Command::Price => commands::price(&cfg, out),
        Command::Bench => commands::bench(&cfg, out),
        Command::Export => commands::export(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
