use std::path::Path;

use serde::{Deserialize, Serialize};

use super::flatfield::{flat_field_correct, DEFAULT_FLAT_FIELD_RADIUS};
use super::gray::GrayImage;
use super::mask::tissue_mask_within;
use super::patches::{extract_patches, PatchConfig, PatchSource};
use super::register::{register_rigid, SearchBounds};
use super::transform::{resample_gray, resample_mueller, RigidTransform};
use crate::error::{Error, Result};
use crate::polarimetry::MuellerImage;

/// Settings of the slide preparation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    /// Output frame `(width, height)`; the polarization reference size when absent.
    pub out_size: Option<(usize, usize)>,
    pub flat_field_radius: usize,
    pub search: SearchBounds,
    pub patches: PatchConfig,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            out_size: None,
            flat_field_radius: DEFAULT_FLAT_FIELD_RADIUS,
            search: SearchBounds::default(),
            patches: PatchConfig::default(),
        }
    }
}

/// One slide: the H&E image (grayscale), the polarization-derived grayscale used as the
/// registration reference, and optionally the Mueller image in the reference frame.
pub struct SlideInputs {
    pub he: GrayImage,
    pub polar: GrayImage,
    pub mueller: Option<MuellerImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Carries polarization-frame content onto the H&E image.
    pub transform: RigidTransform,
    pub registration_score: f64,
    pub out_size: (usize, usize),
    pub coverage_fraction: f64,
    pub tissue_fraction: f64,
    pub mask_degenerate: bool,
    pub total_windows: usize,
    pub kept_windows: usize,
    pub patch_files: usize,
}

/// Flat-field → register → resample → mask → extract.
pub fn run_pipeline(inputs: &SlideInputs, settings: &PipelineSettings, out_dir: &Path) -> Result<PipelineReport> {
    if let Some(m) = &inputs.mueller {
        if (m.width(), m.height()) != (inputs.polar.width(), inputs.polar.height()) {
            return Err(Error::invalid("Mueller image must share the polarization reference frame"));
        }
    }
    let out_size = settings.out_size.unwrap_or((inputs.polar.width(), inputs.polar.height()));
    if out_size.0 == 0 || out_size.1 == 0 {
        return Err(Error::invalid("output size must be nonzero"));
    }
    let he = flat_field_correct(&inputs.he, settings.flat_field_radius)?;
    let polar = flat_field_correct(&inputs.polar, settings.flat_field_radius)?;
    let reg = register_rigid(&he, &polar, &settings.search)?;

    let he_aligned = resample_gray(&he, &reg.transform.inverse(), out_size)?;
    let polar_aligned = resample_gray(&polar, &RigidTransform::identity(), out_size)?;
    let mueller_aligned = inputs
        .mueller
        .as_ref()
        .map(|m| resample_mueller(m, &RigidTransform::identity(), out_size))
        .transpose()?;
    let coverage: Vec<bool> = he_aligned
        .coverage
        .iter()
        .zip(&polar_aligned.coverage)
        .map(|(&a, &b)| a && b)
        .collect();
    let mask = tissue_mask_within(&he_aligned.image, &coverage);

    let mut sources = vec![("he", PatchSource::Gray(&he_aligned.image)), ("polar", PatchSource::Gray(&polar_aligned.image))];
    if let Some(m) = &mueller_aligned {
        sources.push(("mueller", PatchSource::Mueller(&m.image)));
    }
    let (grid, records) = extract_patches(&sources, &mask, &settings.patches, out_dir)?;
    Ok(PipelineReport {
        transform: reg.transform,
        registration_score: reg.score,
        out_size,
        coverage_fraction: coverage.iter().filter(|&&c| c).count() as f64 / coverage.len() as f64,
        tissue_fraction: mask.fraction(),
        mask_degenerate: mask.degenerate,
        total_windows: grid.origins.len(),
        kept_windows: grid.kept(),
        patch_files: records.len(),
    })
}
