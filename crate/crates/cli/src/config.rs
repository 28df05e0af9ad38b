//! Run configuration: per-command defaults, TOML file, flag overrides.

use std::path::{Path, PathBuf};

use qduffing_core::plyap::{EpsilonPolicy, NoisePairing};
use qduffing_core::qsd::BasisPolicy;
use qduffing_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Basis sizes above this need `--allow-large-dim`.
pub const LARGE_DIM_GUARD: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Strobe,
    Plyap,
    MasterCheck,
    Classical,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Strobe => "strobe",
            Command::Plyap => "plyap",
            Command::MasterCheck => "master-check",
            Command::Classical => "classical",
        }
    }
}

/// Everything a run depends on. Stored in every output directory as
/// `config.toml` and inside `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// One value, or the sweep for `plyap`.
    pub beta: Vec<f64>,
    pub gamma: f64,
    pub g: f64,
    pub omega: f64,
    /// Basis size; the cap under the adaptive basis policy.
    pub dim: usize,
    pub dt: f64,
    pub tau_max: f64,
    pub seed: u64,
    pub pairs: usize,
    pub realizations: usize,
    pub epsilon_policy: EpsilonPolicy,
    pub noise: NoisePairing,
    pub basis: BasisPolicy,
    /// 0 uses every core.
    pub workers: usize,
    pub leak_threshold: f64,
    pub record_stride: usize,
    pub allow_large_dim: bool,
    /// Classical initial condition.
    pub x0: f64,
    pub p0: f64,
    pub out: PathBuf,
    /// Damping used by the master equation in `master-check`, if different.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub me_gamma: Option<f64>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let base = RunConfig {
            command,
            beta: vec![1.0],
            gamma: 0.125,
            g: 0.3,
            omega: 1.0,
            dim: 1536,
            dt: 1e-3,
            tau_max: 40.0,
            seed: 0,
            pairs: 10,
            realizations: 100,
            epsilon_policy: EpsilonPolicy::Planck,
            noise: NoisePairing::Independent,
            basis: BasisPolicy::Adaptive,
            workers: 0,
            leak_threshold: 1e-6,
            record_stride: 10,
            allow_large_dim: false,
            x0: 0.0,
            p0: 0.0,
            out: PathBuf::from("out").join(command.name()),
            me_gamma: None,
        };
        match command {
            Command::Strobe => RunConfig {
                tau_max: 1900.0,
                realizations: 1,
                record_stride: 100,
                ..base
            },
            Command::Plyap => RunConfig {
                beta: vec![0.4, 0.6, 1.0, 1.5, 2.0],
                ..base
            },
            Command::MasterCheck => RunConfig {
                dim: 32,
                tau_max: 10.0,
                realizations: 1000,
                basis: BasisPolicy::Fixed,
                leak_threshold: 1e-3,
                ..base
            },
            Command::Classical => RunConfig {
                tau_max: 3800.0,
                x0: 0.5,
                ..base
            },
        }
    }

    /// Defaults for `command`, overlaid with the keys present in `text`.
    pub fn from_toml(command: Command, text: &str) -> Result<Self, String> {
        let file: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        if let Some(c) = file.get("command") {
            if c.as_str() != Some(command.name()) {
                return Err(format!("file is for command {c}, not {}", command.name()));
            }
        }
        let mut table = toml::Table::try_from(RunConfig::defaults(command)).map_err(|e| e.to_string())?;
        table.extend(file);
        table.try_into().map_err(|e: toml::de::Error| e.to_string())
    }

    pub fn load(command: Command, path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        RunConfig::from_toml(command, &text).map_err(|reason| CliError::Format {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.beta.is_empty() {
            return Err(CliError::usage("--beta needs at least one value"));
        }
        if self.command != Command::Plyap && self.beta.len() != 1 {
            return Err(CliError::usage(format!(
                "{} takes a single --beta, got {}",
                self.command.name(),
                self.beta.len()
            )));
        }
        if self.command == Command::Plyap && self.pairs == 0 {
            return Err(CliError::usage("--pairs must be at least 1"));
        }
        if matches!(self.command, Command::Plyap | Command::MasterCheck) && self.realizations == 0 {
            return Err(CliError::usage("--realizations must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(CliError::usage("record_stride must be at least 1"));
        }
        if !(self.leak_threshold > 0.0 && self.leak_threshold < 1.0) {
            return Err(CliError::usage("--leak-threshold must lie in (0, 1)"));
        }
        if self.dim > LARGE_DIM_GUARD && !self.allow_large_dim {
            return Err(CliError::usage(format!(
                "--dim {} exceeds the guard of {LARGE_DIM_GUARD}; pass --allow-large-dim to run it",
                self.dim
            )));
        }
        for &beta in &self.beta {
            self.params(beta).validate()?;
        }
        Ok(())
    }

    pub fn params(&self, beta: f64) -> ModelParams {
        ModelParams {
            beta,
            gamma: self.gamma,
            g: self.g,
            omega: self.omega,
            dim: self.dim,
            dtau: self.dt,
            tau_max: self.tau_max,
        }
    }
}
