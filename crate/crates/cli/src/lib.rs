//! Config-driven experiments on top of `itokit`: kernel validation against
//! simulation, sampling, training, temperature studies and sampler sweeps.
//! Every command writes CSV tables and JSON documents that embed the
//! resolved config, so any output can be regenerated from itself.

use std::path::Path;

pub mod commands;
pub mod config;
pub mod error;
pub mod metrics;
pub mod output;

pub use config::{ExperimentConfig, Resolved};
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ValidateKernels,
    Sample,
    Train,
    TemperatureStudy,
    Sweep,
}

/// Runs one command, writing its outputs into `out` (created if missing).
pub fn execute(command: Command, resolved: &Resolved, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    match command {
        Command::ValidateKernels => commands::validate::run(resolved, out),
        Command::Sample => commands::sample::run(resolved, out),
        Command::Train => commands::train::run(resolved, out),
        Command::TemperatureStudy => commands::temperature::run(resolved, out),
        Command::Sweep => commands::sweep::run(resolved, out),
    }
}
