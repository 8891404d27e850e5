//! Run manifests: every file-producing subcommand drops a JSON record of
//! what ran, with which inputs, outputs, seed, and resolved configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use treehop_core::{Error, Result};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_path: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub effective_config: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config_path: Option<&Path>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_path: config_path.map(|p| p.display().to_string()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            effective_config: serde_json::Value::Null,
        }
    }

    pub fn input(mut self, role: &str, path: &Path) -> Self {
        self.inputs.insert(role.to_string(), path.display().to_string());
        self
    }

    pub fn output(mut self, role: &str, path: &Path) -> Self {
        self.outputs.insert(role.to_string(), path.display().to_string());
        self
    }

    pub fn config<T: Serialize>(mut self, cfg: &T) -> Result<Self> {
        self.effective_config = serde_json::to_value(cfg)
            .map_err(|e| Error::Config(format!("manifest config: {e}")))?;
        Ok(self)
    }
}

/// Manifest location for a single-file output: a `.manifest.json` sibling.
pub fn for_file(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    out.with_file_name(format!("{name}.manifest.json"))
}

/// Manifest location for a directory output.
pub fn for_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn write(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}
