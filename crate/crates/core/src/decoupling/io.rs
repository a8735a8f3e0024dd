//! Embedding batches on disk: a PMM raster with `height = 1`, `width = B`,
//! `channels = K`, next to a JSON sidecar with the modality/view tags and partition.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::batch::{EmbeddingBatch, Modality, View};
use super::loss::PartitionConfig;
use crate::error::{Error, Result};
use crate::io::{read_pmm_file, write_pmm_file, PmmRaster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub modality: Modality,
    pub view: View,
    pub partition: PartitionConfig,
}

/// `emb.pmm` → `emb.json`.
pub fn sidecar_path(pmm_path: &Path) -> PathBuf {
    pmm_path.with_extension("json")
}

pub fn write_embeddings(path: &Path, batch: &EmbeddingBatch, partition: &PartitionConfig) -> Result<()> {
    let values = batch.values();
    let raster = PmmRaster::new(
        values.nrows() as u32,
        1,
        values.ncols() as u32,
        values.iter().map(|&v| v as f32).collect(),
    )?;
    write_pmm_file(path, &raster)?;
    let sidecar = EmbeddingSidecar { modality: batch.modality, view: batch.view, partition: *partition };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<(EmbeddingBatch, PartitionConfig)> {
    let raster = read_pmm_file(path)?;
    if raster.height != 1 {
        return Err(Error::Format(format!("embedding PMM must have height 1, found {}", raster.height)));
    }
    let sidecar: EmbeddingSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    sidecar.partition.validate()?;
    if sidecar.partition.k_total != raster.channels as usize {
        return Err(Error::Format(format!(
            "sidecar k_total {} does not match PMM channels {}",
            sidecar.partition.k_total, raster.channels
        )));
    }
    let values = Array2::from_shape_vec(
        (raster.width as usize, raster.channels as usize),
        raster.data.iter().map(|&v| f64::from(v)).collect(),
    )
    .map_err(|e| Error::Format(e.to_string()))?;
    Ok((EmbeddingBatch::new(values, sidecar.modality, sidecar.view)?, sidecar.partition))
}
