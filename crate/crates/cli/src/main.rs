mod config;
mod error;
mod report;
mod run;

use std::path::PathBuf;

use clap::Parser;

use config::{Experiment, ExperimentConfig};
use error::CliError;

/// Run a geometric Lorenz experiment and write its CSV artifacts and manifest.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Experiment to run; overrides the `experiment` key of the config file.
    experiment: Option<Experiment>,
    /// Flat TOML config, or a manifest from an earlier run to reproduce it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (for `report`, the run directory to summarize).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for all random streams; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path, args.experiment)?,
        None => ExperimentConfig::resolve(None, args.experiment)?,
    };
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn main() {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| {
        cfg.validate()?;
        if let Some(t) = cfg.threads {
            // only fails if a pool already exists, which cannot happen this early
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
        run::run(&cfg)
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
