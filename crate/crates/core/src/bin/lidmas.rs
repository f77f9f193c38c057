use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use lidmas::cli::{cmd_boundary, cmd_calibrate, cmd_sensitivity, cmd_sweep, CommandReport};
use lidmas::config::{apply_overrides, load_config, parse_config, Overrides, RunConfig, SEED_ENV};

#[derive(Parser)]
#[command(name = "lidmas", version, about = "RUS magic-state injection sweeps for GKP photonic qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the parameter grid and write the sweep table.
    Sweep(Common),
    /// Finite-difference gradients of F_log, one file per distance.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Rerun the sweep instead of reading the existing table.
        #[arg(long)]
        regenerate: bool,
    },
    /// Minimum squeezing meeting the P_succ and F_log targets.
    Boundary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        regenerate: bool,
    },
    /// Search the free noise constants against the headline brackets.
    Calibrate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; absent keys take the shipped defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; wins over the config file and LIDMAS_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the worker pool")?;
        }
        let loaded = match &self.config {
            Some(path) => load_config(path)?,
            None => parse_config("{}")?,
        };
        let overrides = Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            trials: self.trials,
        };
        let env_seed = std::env::var(SEED_ENV).ok();
        Ok(apply_overrides(loaded, &overrides, env_seed.as_deref())?)
    }
}

fn run(cli: Cli) -> anyhow::Result<CommandReport> {
    Ok(match cli.command {
        Command::Sweep(c) => cmd_sweep(&c.resolve()?)?,
        Command::Sensitivity { common, regenerate } => cmd_sensitivity(&common.resolve()?, regenerate)?,
        Command::Boundary { common, regenerate } => cmd_boundary(&common.resolve()?, regenerate)?,
        Command::Calibrate(c) => cmd_calibrate(&c.resolve()?)?,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            println!("{}", report.summary);
            if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
