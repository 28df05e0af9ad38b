//! Experiment runner for the quantum Duffing simulator: configuration,
//! orchestration, CSV/JSON outputs and run manifests.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, execute_to_disk, replay, Outcome, RunResult};
pub use config::{Command, RunConfig};
pub use error::{CliError, CliResult};
pub use output::RunManifest;
