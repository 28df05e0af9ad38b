pub mod classical;
pub mod master_check;
pub mod plyap;
pub mod strobe;

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{OutputSet, RunManifest};

/// Typed result of one command.
#[derive(Clone, Debug)]
pub enum Outcome {
    Strobe(strobe::StrobeOutcome),
    Plyap(Vec<plyap::PlyapOutcome>),
    MasterCheck(master_check::MasterCheckReport),
    Classical(classical::ClassicalOutcome),
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub files: OutputSet,
    pub manifest: RunManifest,
}

/// Runs `config` without touching the disk.
pub fn execute(config: &RunConfig) -> CliResult<RunResult> {
    config.validate()?;
    let clock = Instant::now();
    let mut files = OutputSet::default();
    let outcome = match config.command {
        Command::Strobe => Outcome::Strobe(strobe::run(config, &mut files)?),
        Command::Plyap => Outcome::Plyap(plyap::run(config, &mut files)?),
        Command::MasterCheck => Outcome::MasterCheck(master_check::run(config, &mut files)?),
        Command::Classical => Outcome::Classical(classical::run(config, &mut files)?),
    };
    let manifest = RunManifest::new(config.clone(), clock.elapsed().as_secs_f64(), &files);
    Ok(RunResult {
        outcome,
        files,
        manifest,
    })
}

/// Runs `config` and writes its outputs to `config.out`.
pub fn execute_to_disk(config: &RunConfig) -> CliResult<RunResult> {
    let result = execute(config)?;
    result.files.write(&config.out, &result.manifest)?;
    Ok(result)
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub manifest_path: PathBuf,
    pub result: RunResult,
    /// `(file, matches)` for every file the manifest lists.
    pub files: Vec<(String, bool)>,
}

/// Re-runs the configuration stored in a manifest, optionally into another
/// directory and with another worker count, and compares content hashes.
pub fn replay(manifest: &Path, out: Option<PathBuf>, workers: Option<usize>) -> CliResult<ReplayReport> {
    let (recorded, manifest_path) = RunManifest::load(manifest)?;
    let mut config = recorded.config.clone();
    config.out = match out {
        Some(dir) => dir,
        None => manifest_path
            .parent()
            .map(|d| d.join("replay"))
            .unwrap_or_else(|| PathBuf::from("replay")),
    };
    if let Some(w) = workers {
        config.workers = w;
    }
    let result = execute_to_disk(&config)?;
    let fresh = result.files.hashes();
    let files: Vec<(String, bool)> = recorded
        .files
        .iter()
        .map(|(name, hash)| (name.clone(), fresh.get(name) == Some(hash)))
        .collect();
    let extra: Vec<String> = fresh.keys().filter(|k| !recorded.files.contains_key(*k)).cloned().collect();
    let mismatched: Vec<String> = files
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n.clone())
        .chain(extra)
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::ReplayMismatch(mismatched));
    }
    Ok(ReplayReport {
        manifest_path,
        result,
        files,
    })
}
