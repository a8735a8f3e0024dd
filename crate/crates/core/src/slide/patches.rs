use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::gray::GrayImage;
use super::mask::TissueMask;
use crate::error::{Error, Result};
use crate::io::write_pmm_file;
use crate::polarimetry::MuellerImage;

pub const DEFAULT_PATCH_SIZE: usize = 224;
pub const DEFAULT_MIN_TISSUE_FRACTION: f64 = 0.1;
pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchConfig {
    pub patch_size: usize,
    pub stride: usize,
    pub min_tissue_fraction: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { patch_size: DEFAULT_PATCH_SIZE, stride: DEFAULT_PATCH_SIZE, min_tissue_fraction: DEFAULT_MIN_TISSUE_FRACTION }
    }
}

impl PatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 || !(0.0..=1.0).contains(&self.min_tissue_fraction) {
            return Err(Error::invalid("patch size and stride must be >= 1, min tissue fraction in [0, 1]"));
        }
        Ok(())
    }
}

/// Sliding-window layout shared by every modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub patch_size: usize,
    pub stride: usize,
    pub origins: Vec<(usize, usize)>,
    pub tissue_fraction: Vec<f64>,
    /// Whether each window meets the minimum tissue fraction.
    pub keep: Vec<bool>,
}

impl TileGrid {
    /// All windows lying fully inside a `width × height` frame, row-major order.
    pub fn new(mask: &TissueMask, cfg: &PatchConfig) -> Result<Self> {
        cfg.validate()?;
        let p = cfg.patch_size;
        let mut origins = Vec::new();
        if p <= mask.width && p <= mask.height {
            for y in (0..=mask.height - p).step_by(cfg.stride) {
                for x in (0..=mask.width - p).step_by(cfg.stride) {
                    origins.push((x, y));
                }
            }
        }
        let tissue_fraction: Vec<f64> = origins.iter().map(|&(x, y)| mask.window_fraction(x, y, p, p)).collect();
        let keep = tissue_fraction.iter().map(|&f| f >= cfg.min_tissue_fraction).collect();
        Ok(Self { patch_size: p, stride: cfg.stride, origins, tissue_fraction, keep })
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// One modality's aligned image.
#[derive(Debug, Clone, Copy)]
pub enum PatchSource<'a> {
    Gray(&'a GrayImage),
    Mueller(&'a MuellerImage),
}

impl PatchSource<'_> {
    fn size(&self) -> (usize, usize) {
        match self {
            PatchSource::Gray(g) => (g.width(), g.height()),
            PatchSource::Mueller(m) => (m.width(), m.height()),
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            PatchSource::Gray(_) => "pgm",
            PatchSource::Mueller(_) => "pmm",
        }
    }

    fn write_patch(&self, path: &Path, x: usize, y: usize, p: usize) -> Result<()> {
        match self {
            PatchSource::Gray(g) => g.crop(x, y, p, p)?.write_pgm(path),
            PatchSource::Mueller(m) => write_pmm_file(path, &m.crop(x, y, p, p)?.to_pmm()),
        }
    }
}

/// A manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub origin_x: usize,
    pub origin_y: usize,
    pub modality: String,
    /// Relative to the output directory.
    pub path: PathBuf,
    pub tissue_fraction: f64,
}

/// Writes every kept window of every modality under `out_dir/<modality>/` and a
/// JSON-lines manifest at `out_dir/manifest.jsonl`.
pub fn extract_patches(
    sources: &[(&str, PatchSource<'_>)],
    mask: &TissueMask,
    cfg: &PatchConfig,
    out_dir: &Path,
) -> Result<(TileGrid, Vec<PatchRecord>)> {
    let frame = (mask.width, mask.height);
    for (name, src) in sources {
        if src.size() != frame {
            return Err(Error::invalid(format!(
                "modality {name} is {:?}, expected {:?} like the mask",
                src.size(),
                frame
            )));
        }
        if name.is_empty() || name.contains(['/', '\\']) || *name == "." || *name == ".." {
            return Err(Error::invalid(format!("modality name {name:?} is not a plain directory name")));
        }
    }
    let grid = TileGrid::new(mask, cfg)?;
    fs::create_dir_all(out_dir)?;
    let mut records = Vec::new();
    for (name, _) in sources {
        fs::create_dir_all(out_dir.join(name))?;
    }
    for (i, &(x, y)) in grid.origins.iter().enumerate() {
        if !grid.keep[i] {
            continue;
        }
        for (name, src) in sources {
            let rel = Path::new(name).join(format!("{x}_{y}.{}", src.extension()));
            src.write_patch(&out_dir.join(&rel), x, y, grid.patch_size)?;
            records.push(PatchRecord {
                origin_x: x,
                origin_y: y,
                modality: name.to_string(),
                path: rel,
                tissue_fraction: grid.tissue_fraction[i],
            });
        }
    }
    let mut manifest = BufWriter::new(File::create(out_dir.join(MANIFEST_NAME))?);
    for r in &records {
        serde_json::to_writer(&mut manifest, r)?;
        manifest.write_all(b"\n")?;
    }
    manifest.flush()?;
    Ok((grid, records))
}
