use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Record of one command invocation. Its `config` is the fully resolved configuration,
/// so `--config run_manifest.json` repeats the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    /// Absent until the command finishes.
    pub wall_clock_seconds: Option<f64>,
}

pub struct ManifestWriter {
    path: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl ManifestWriter {
    /// Writes the manifest before any output is produced.
    pub fn start(out_dir: &Path, command: &str, config: &impl Serialize, inputs: Vec<PathBuf>, seeds: BTreeMap<String, u64>) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let writer = Self {
            path: out_dir.join(MANIFEST_FILE),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config: serde_json::to_value(config)?,
                inputs,
                outputs: Vec::new(),
                seeds,
                threads: rayon::current_num_threads(),
                wall_clock_seconds: None,
            },
            started: Instant::now(),
        };
        writer.write()?;
        Ok(writer)
    }

    fn write(&self) -> Result<()> {
        fs::write(&self.path, serde_json::to_string_pretty(&self.manifest)? + "\n")
            .with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.manifest.outputs.push(path.into());
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        self.write()
    }
}

/// Reads a command configuration from a plain config file or from a run manifest of
/// the same command. Relative paths inside are resolved by the caller against the
/// returned directory.
pub fn load_config<T: DeserializeOwned>(path: &Path, command: &str) -> Result<(T, PathBuf)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let value = match value {
        Value::Object(ref map) if map.contains_key("command") && map.contains_key("config") => {
            let recorded = map["command"].as_str().unwrap_or_default();
            if recorded != command {
                bail!(crate::UsageError(format!(
                    "{} is a manifest of `{recorded}`, not `{command}`",
                    path.display()
                )));
            }
            map["config"].clone()
        }
        other => other,
    };
    let config = serde_json::from_value(value).with_context(|| format!("interpreting config {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

/// `path` made absolute, relative paths taken against `base`.
pub fn resolve(base: &Path, path: &Path) -> Result<PathBuf> {
    let joined = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    Ok(std::path::absolute(&joined)?)
}
