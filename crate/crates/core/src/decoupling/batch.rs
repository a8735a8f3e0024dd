use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default degeneracy threshold on a column's population standard deviation.
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    /// Brightfield H&E.
    H,
    /// Polarization.
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum View {
    One,
    Two,
}

impl TryFrom<u8> for View {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(View::One),
            2 => Ok(View::Two),
            _ => Err(format!("view tag must be 1 or 2, got {v}")),
        }
    }
}

impl From<View> for u8 {
    fn from(v: View) -> u8 {
        match v {
            View::One => 1,
            View::Two => 2,
        }
    }
}

/// `B × K` embeddings of one view of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    values: Array2<f64>,
    pub modality: Modality,
    pub view: View,
}

impl EmbeddingBatch {
    pub fn new(values: Array2<f64>, modality: Modality, view: View) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::invalid(format!("batch size {} is below 2", values.nrows())));
        }
        if values.ncols() == 0 {
            return Err(Error::invalid("embedding dimension is zero"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding batch contains non-finite values"));
        }
        Ok(Self { values, modality, view })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn batch_size(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn tag(&self) -> (Modality, View) {
        (self.modality, self.view)
    }
}

/// A standardized batch plus the columns whose spread was too small to scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBatch {
    pub batch: EmbeddingBatch,
    pub degenerate: Vec<bool>,
}

/// Per-column standardization with the population standard deviation. Columns with
/// `std < eps` are centered but not scaled, and flagged.
pub fn batch_normalize(e: &EmbeddingBatch, eps: f64) -> Result<NormalizedBatch> {
    if !(eps > 0.0) {
        return Err(Error::invalid("normalization eps must be positive"));
    }
    let b = e.batch_size() as f64;
    let mut out = e.values.clone();
    let mut degenerate = vec![false; e.dim()];
    for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mean = col.sum() / b;
        col.mapv_inplace(|v| v - mean);
        let std = (col.iter().map(|v| v * v).sum::<f64>() / b).sqrt();
        if std < eps {
            degenerate[k] = true;
        } else {
            col.mapv_inplace(|v| v / std);
        }
    }
    Ok(NormalizedBatch {
        batch: EmbeddingBatch { values: out, modality: e.modality, view: e.view },
        degenerate,
    })
}
