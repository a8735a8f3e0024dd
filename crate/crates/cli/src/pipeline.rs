use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use polarhe::io::read_pmm_file;
use polarhe::polarimetry::MuellerImage;
use polarhe::slide::{run_pipeline, GrayImage, PipelineSettings, SlideInputs, MANIFEST_NAME};
use serde::{Deserialize, Serialize};

use crate::manifest::{load_config, resolve, ManifestWriter};
use crate::{Common, UsageError};

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    /// H&E image (PGM); overrides the config.
    #[arg(long)]
    he: Option<PathBuf>,
    /// Polarization-derived grayscale reference (PGM); overrides the config.
    #[arg(long)]
    polar: Option<PathBuf>,
    /// Mueller image in the reference frame (PMM); overrides the config.
    #[arg(long)]
    mueller: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub he: PathBuf,
    #[serde(default)]
    pub polar: PathBuf,
    #[serde(default)]
    pub mueller: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: PipelineSettings,
}

pub fn run(args: PipelineArgs) -> Result<()> {
    let cwd = std::env::current_dir()?;
    let mut cfg = match &args.common.config {
        Some(path) => {
            let (mut cfg, base): (PipelineConfig, _) = load_config(path, "pipeline")?;
            if !cfg.he.as_os_str().is_empty() {
                cfg.he = resolve(&base, &cfg.he)?;
            }
            if !cfg.polar.as_os_str().is_empty() {
                cfg.polar = resolve(&base, &cfg.polar)?;
            }
            cfg.mueller = cfg.mueller.map(|m| resolve(&base, &m)).transpose()?;
            cfg
        }
        None => PipelineConfig::default(),
    };
    if let Some(p) = &args.he {
        cfg.he = resolve(&cwd, p)?;
    }
    if let Some(p) = &args.polar {
        cfg.polar = resolve(&cwd, p)?;
    }
    if let Some(p) = &args.mueller {
        cfg.mueller = Some(resolve(&cwd, p)?);
    }
    if cfg.he.as_os_str().is_empty() || cfg.polar.as_os_str().is_empty() {
        return Err(UsageError("pipeline needs both an H&E and a polarization image".into()).into());
    }

    let out = &args.common.out;
    let mut inputs = vec![cfg.he.clone(), cfg.polar.clone()];
    inputs.extend(cfg.mueller.clone());
    let mut manifest = ManifestWriter::start(out, "pipeline", &cfg, inputs, BTreeMap::new())?;

    let read_gray = |p: &PathBuf| GrayImage::read_pgm(p).with_context(|| format!("reading {}", p.display()));
    let slide = SlideInputs {
        he: read_gray(&cfg.he)?,
        polar: read_gray(&cfg.polar)?,
        mueller: cfg
            .mueller
            .as_ref()
            .map(|p| {
                read_pmm_file(p)
                    .and_then(|r| MuellerImage::from_pmm(&r))
                    .with_context(|| format!("reading {}", p.display()))
            })
            .transpose()?,
    };
    let patch_dir = out.join("patches");
    let report = run_pipeline(&slide, &cfg.settings, &patch_dir)?;
    manifest.output(patch_dir.join(MANIFEST_NAME));
    let report_path = out.join("pipeline_report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    manifest.output(report_path);
    manifest.finish()?;
    println!(
        "kept {}/{} patches per modality ({} files), registration score {:.4}",
        report.kept_windows, report.total_windows, report.patch_files, report.registration_score
    );
    Ok(())
}
