use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use polarhe::decoupling::{decoupling_metrics, read_embeddings};
use serde::{Deserialize, Serialize};

use crate::manifest::{load_config, resolve, ManifestWriter};
use crate::{Common, UsageError};

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    common: Common,
    /// H&E embeddings (PMM with JSON sidecar).
    #[arg(long = "h")]
    h: Option<PathBuf>,
    /// Polarization embeddings (PMM with JSON sidecar).
    #[arg(long = "p")]
    p: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsConfig {
    #[serde(default)]
    pub h: PathBuf,
    #[serde(default)]
    pub p: PathBuf,
}

pub fn run(args: MetricsArgs) -> Result<()> {
    let cwd = std::env::current_dir()?;
    let mut cfg = match &args.common.config {
        Some(path) => {
            let (cfg, base): (MetricsConfig, _) = load_config(path, "metrics")?;
            MetricsConfig { h: resolve(&base, &cfg.h)?, p: resolve(&base, &cfg.p)? }
        }
        None => MetricsConfig::default(),
    };
    if let Some(h) = &args.h {
        cfg.h = resolve(&cwd, h)?;
    }
    if let Some(p) = &args.p {
        cfg.p = resolve(&cwd, p)?;
    }
    if cfg.h.as_os_str().is_empty() || cfg.p.as_os_str().is_empty() {
        return Err(UsageError("metrics needs --h and --p embedding files".into()).into());
    }
    let out = &args.common.out;
    let mut manifest = ManifestWriter::start(out, "metrics", &cfg, vec![cfg.h.clone(), cfg.p.clone()], BTreeMap::new())?;
    let (fh, part_h) = read_embeddings(&cfg.h).with_context(|| format!("reading {}", cfg.h.display()))?;
    let (fp, part_p) = read_embeddings(&cfg.p).with_context(|| format!("reading {}", cfg.p.display()))?;
    if part_h != part_p {
        return Err(UsageError("the two embedding files disagree on the partition".into()).into());
    }
    let metrics = decoupling_metrics(&fh, &fp, &part_h)?;
    let path = out.join("metrics.json");
    fs::write(&path, serde_json::to_string_pretty(&metrics)? + "\n")?;
    manifest.output(path);
    manifest.finish()?;
    println!(
        "common diagonal {:.4}, |unique diagonal| {:.4}, min std {:.3e}{}",
        metrics.common_diag_mean,
        metrics.unique_diag_abs_mean,
        metrics.min_std,
        if metrics.collapsed { " (collapsed)" } else { "" }
    );
    Ok(())
}
