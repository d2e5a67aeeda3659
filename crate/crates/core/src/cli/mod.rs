//! The `cgas` command line: configuration, artifact layout and subcommands.
//!
//! Each subcommand reads a TOML experiment file (see [`config`]), writes its
//! outputs atomically under the output directory and records their checksums
//! in `manifest.json`. `sample` and `analyze` consume what earlier stages wrote.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Result;
use commands::Context;
use config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "cgas", version, about = "Planar Coulomb gas toolkit")]
pub struct Cli {
    /// Experiment file (TOML). `CGAS_SECTION__KEY` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed for both the sampler and the exact draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve for the equilibrium measure and write `equilibrium.json`, `fields.csv`.
    Equilibrium,
    /// Run Metropolis chains and write per-chain tables and snapshots.
    Sample,
    /// Exact `β = 1` quantities for radial potentials.
    Exact,
    /// Tail, localization, decay, convergence and energy reports.
    Analyze,
    /// Self-checks of solver, sampler and kernel invariants.
    Verify,
}

impl Cli {
    pub fn context(&self) -> Result<Context> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.sampler.seed = s;
            cfg.exact.seed = s;
        }
        cfg.validate()?;
        Ok(Context::new(cfg, self.out.clone()))
    }

    /// Run the subcommand; `Ok(false)` means `verify` found a violation.
    pub fn execute(&self) -> Result<bool> {
        if let Some(t) = self.threads {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                log::warn!("thread pool already initialised: {e}");
            }
        }
        let ctx = self.context()?;
        match self.command {
            Command::Equilibrium => commands::equilibrium(&ctx).map(|_| true),
            Command::Sample => commands::sample(&ctx).map(|_| true),
            Command::Exact => commands::exact(&ctx).map(|_| true),
            Command::Analyze => commands::analyze(&ctx).map(|_| true),
            Command::Verify => {
                let r = verify::verify(&ctx)?;
                for c in r.checks.iter().filter(|c| c.hard && !c.passed) {
                    eprintln!("verify: {} failed: {}", c.name, c.detail);
                }
                Ok(r.passed())
            }
        }
    }
}

/// Entry point of the binary: exit 0 on success, 1 when `verify` fails and 2
/// on any error.
pub fn main_with(cli: Cli) -> ExitCode {
    match cli.execute() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
