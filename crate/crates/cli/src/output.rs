//! Output files, content hashes and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Bumped whenever a CSV layout changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// CSV text with a `# schema` comment line and a header row.
#[derive(Clone, Debug)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(schema: &str, header: &[&str]) -> Self {
        let mut text = format!("# qduffing {schema} v{CSV_SCHEMA_VERSION}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Csv {
            text,
            columns: header.len(),
        }
    }

    /// `None` cells are left empty.
    pub fn row(&mut self, cells: &[Option<f64>]) {
        debug_assert_eq!(cells.len(), self.columns);
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            if let Some(v) = c {
                write!(self.text, "{v}").unwrap();
            }
        }
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Numeric outputs of one run, in file-name order.
#[derive(Clone, Debug, Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect()
    }

    /// Writes every file plus `config.toml` and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, manifest: &RunManifest) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(CliError::io(path))?;
        }
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, manifest.config.to_toml()).map_err(CliError::io(path))?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(CliError::io(path))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub master_seed: u64,
    pub code_version: String,
    pub csv_schema_version: u32,
    pub duration_seconds: f64,
    /// SHA-256 of every numeric output, by file name.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: RunConfig, duration_seconds: f64, files: &OutputSet) -> Self {
        RunManifest {
            master_seed: config.seed,
            config,
            code_version: format!("qduffing {}", env!("CARGO_PKG_VERSION")),
            csv_schema_version: CSV_SCHEMA_VERSION,
            duration_seconds,
            files: files.hashes(),
        }
    }

    /// Accepts the manifest file or the directory holding it.
    pub fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(CliError::io(&file))?;
        let manifest = serde_json::from_str(&text).map_err(|e| CliError::Format {
            path: file.clone(),
            reason: e.to_string(),
        })?;
        Ok((manifest, file))
    }
}
