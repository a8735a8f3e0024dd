use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::batch::{batch_normalize, EmbeddingBatch, BN_EPS};
use super::correlation::cross_correlation;
use super::loss::{block, PartitionConfig};
use crate::error::{Error, Result};

/// Embeddings whose smallest per-dimension standard deviation is at or below this are
/// considered collapsed.
pub const COLLAPSE_STD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingMetrics {
    pub common_diag_mean: f64,
    pub common_offdiag_abs_mean: f64,
    pub unique_diag_abs_mean: f64,
    pub unique_offdiag_abs_mean: f64,
    pub std_h: Vec<f64>,
    pub std_p: Vec<f64>,
    pub min_std: f64,
    pub collapsed: bool,
}

fn diag_and_offdiag(values: &ndarray::Array2<f64>, abs_diag: bool) -> (f64, f64) {
    let k = values.nrows();
    let mut diag = 0.0;
    let mut off = 0.0;
    for ((i, j), v) in values.indexed_iter() {
        if i == j {
            diag += if abs_diag { v.abs() } else { *v };
        } else {
            off += v.abs();
        }
    }
    let off_count = (k * k - k).max(1) as f64;
    (diag / k as f64, off / off_count)
}

fn column_std(e: &EmbeddingBatch) -> Vec<f64> {
    let b = e.batch_size() as f64;
    e.values()
        .axis_iter(Axis(1))
        .map(|col| {
            let mean = col.sum() / b;
            (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / b).sqrt()
        })
        .collect()
}

/// Block statistics of the cross-modal correlation between `fh` and `fp`, plus per-dimension
/// spread of each batch.
pub fn decoupling_metrics(fh: &EmbeddingBatch, fp: &EmbeddingBatch, part: &PartitionConfig) -> Result<DecouplingMetrics> {
    part.validate()?;
    if fh.values().dim() != fp.values().dim() || fh.dim() != part.k_total {
        return Err(Error::invalid("metric inputs must share shape B x k_total"));
    }
    let c = cross_correlation(&batch_normalize(fh, BN_EPS)?, &batch_normalize(fp, BN_EPS)?)?;
    let (common_diag_mean, common_offdiag_abs_mean) = diag_and_offdiag(&block(c.values(), part.common_range()), false);
    let (unique_diag_abs_mean, unique_offdiag_abs_mean) = diag_and_offdiag(&block(c.values(), part.unique_range()), true);
    let std_h = column_std(fh);
    let std_p = column_std(fp);
    let min_std = std_h.iter().chain(&std_p).copied().fold(f64::INFINITY, f64::min);
    Ok(DecouplingMetrics {
        common_diag_mean,
        common_offdiag_abs_mean,
        unique_diag_abs_mean,
        unique_offdiag_abs_mean,
        std_h,
        std_p,
        min_std,
        collapsed: min_std <= COLLAPSE_STD,
    })
}
