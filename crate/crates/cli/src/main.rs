//! Experiment runner for the lifted samplers: config-driven sweeps emitting
//! CSV tables, plus an oracle validation suite.
//!
//! Exit codes: 0 on success, 1 when the validation suite fails, 2 on usage
//! or configuration errors.

mod config;
mod experiments;
mod validate;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::{parse_config, Experiment};

/// Environment variable overriding the default worker count.
const THREADS_ENV: &str = "LIFTED_MCMC_THREADS";

#[derive(Parser)]
#[command(name = "lifted-mcmc", version, about = "Lifted MCMC experiment runner")]
struct Cli {
    /// Output directory for CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (defaults to LIFTED_MCMC_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Run the exact-oracle validation suite.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<bool> {
    let threads = cli.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Validate { seed } => Ok(validate::run_validation(seed)),
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            if cfg.experiment == Experiment::Validate {
                return Ok(validate::run_validation(cfg.seed));
            }
            let records = experiments::run_experiment(&cfg)?;
            if records.is_empty() {
                anyhow::bail!("experiment produced no rows; check sampler/proposal lists");
            }
            std::fs::create_dir_all(&cli.out)
                .with_context(|| format!("creating {}", cli.out.display()))?;
            let path = cli.out.join(&cfg.output);
            let file = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            lifted_mcmc::diagnostics::write_summary(file, &records)
                .context("writing summary CSV")?;
            println!("wrote {} rows to {}", records.len(), path.display());
            Ok(true)
        }
    }
}
