use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use polarhe::io::{read_pmm_file, write_pgm_file, write_pmm_file};
use polarhe::polarimetry::{property_maps, render_map, MuellerImage, RenderStyle};
use serde::{Deserialize, Serialize};

use crate::manifest::{load_config, resolve, ManifestWriter};
use crate::{Common, UsageError};

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    /// Mueller image (PMM, 16 channels).
    input: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecomposeConfig {
    pub input: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    width: usize,
    height: usize,
    valid_pixels: usize,
    invalid_pixels: usize,
}

pub fn run(args: DecomposeArgs) -> Result<()> {
    let cwd = std::env::current_dir()?;
    let mut cfg = match &args.common.config {
        Some(path) => {
            let (cfg, base): (DecomposeConfig, _) = load_config(path, "decompose")?;
            DecomposeConfig { input: resolve(&base, &cfg.input)? }
        }
        None => DecomposeConfig { input: PathBuf::new() },
    };
    if let Some(input) = &args.input {
        cfg.input = resolve(&cwd, input)?;
    }
    if cfg.input.as_os_str().is_empty() {
        return Err(UsageError("decompose needs an input PMM path or --config".into()).into());
    }
    let out = &args.common.out;
    let mut manifest = ManifestWriter::start(out, "decompose", &cfg, vec![cfg.input.clone()], BTreeMap::new())?;

    let raster = read_pmm_file(&cfg.input).with_context(|| format!("reading {}", cfg.input.display()))?;
    let image = MuellerImage::from_pmm(&raster)?;
    let maps = property_maps(&image);

    let layers = [
        ("retardance", &maps.retardance, (0.0, PI), RenderStyle::Linear),
        ("fast_axis", &maps.fast_axis, (-FRAC_PI_2, FRAC_PI_2), RenderStyle::Cyclic),
        ("depolarization", &maps.depolarization, (0.0, 1.0), RenderStyle::Linear),
    ];
    let (w, h) = (maps.width as u32, maps.height as u32);
    for (name, map, range, style) in layers {
        let pmm = out.join(format!("{name}.pmm"));
        write_pmm_file(&pmm, &maps.to_pmm(map))?;
        let pgm = out.join(format!("{name}.pgm"));
        write_pgm_file(&pgm, w, h, &render_map(map, range, style)?)?;
        manifest.output(pmm);
        manifest.output(pgm);
    }
    let mask: Vec<u8> = maps.valid_mask.iter().map(|&v| if v { 255 } else { 0 }).collect();
    let mask_path = out.join("valid_mask.pgm");
    write_pgm_file(&mask_path, w, h, &mask)?;
    manifest.output(mask_path);

    let valid = maps.valid_mask.iter().filter(|&&v| v).count();
    let summary = Summary { width: maps.width, height: maps.height, valid_pixels: valid, invalid_pixels: maps.valid_mask.len() - valid };
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    manifest.output(summary_path);
    manifest.finish()?;
    println!("decomposed {}x{} pixels ({} invalid)", maps.width, maps.height, summary.invalid_pixels);
    Ok(())
}
