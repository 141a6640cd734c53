//! Experiment runner for the qsplab simulator.
//!
//! Configs are JSON documents (`{experiment, seed, output_dir, backend,
//! trajectories, params}`); command-line flags override their fields. Every
//! run writes `<output_dir>/<experiment>.csv` and a `.json` sidecar.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{resolve, Cli, ExperimentConfig};
pub use error::CliError;
pub use output::{Report, Written};

use qsplab_core::Execution;

/// Resolves the config, runs it, and writes the outputs.
pub fn run(cli: &Cli) -> Result<(ExperimentConfig, Written), CliError> {
    let mut cfg = resolve(cli)?;
    let report = experiments::execute(&mut cfg, Execution::Parallel)?;
    let written = output::write_report(&cfg, &report)?;
    Ok((cfg, written))
}

/// Sizes the global rayon pool from `QSPLAB_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QSPLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Invalid(format!(
            "QSPLAB_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}
