//! Batch front-end for expected signature kernels, MMDs and their validation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::Experiment;

#[derive(Debug, Parser)]
#[command(name = "levy-sigkernel", version, about = "Expected signature kernels of inhomogeneous Lévy processes")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for independent solves and Monte Carlo paths.
    #[arg(long, env = "LEVY_SIGKERNEL_THREADS")]
    threads: Option<usize>,
    /// Monte Carlo seed; overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = config::load(&cli.config)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out = cli
        .output
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let seed = cli.seed.or(cfg.mc.as_ref().map(|m| m.seed)).unwrap_or(0);

    match cfg.experiment {
        Experiment::Kernel => commands::cmd_kernel(&cfg, &out)?,
        Experiment::Mmd => commands::cmd_mmd(&cfg, &out)?,
        Experiment::Validate => return commands::cmd_validate(&cfg, &out, seed),
        Experiment::Bounds => commands::cmd_bounds(&cfg, &out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
