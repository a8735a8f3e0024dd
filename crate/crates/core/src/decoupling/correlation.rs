use ndarray::{Array2, Axis};

use super::batch::{Modality, NormalizedBatch, View};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    values: Array2<f64>,
    pub provenance: ((Modality, View), (Modality, View)),
}

impl CorrelationMatrix {
    /// Wraps a square matrix, e.g. to evaluate a loss on a hand-built correlation.
    pub fn from_values(values: Array2<f64>, provenance: ((Modality, View), (Modality, View))) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::invalid("correlation matrix must be square"));
        }
        Ok(Self { values, provenance })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn order(&self) -> usize {
        self.values.nrows()
    }
}

/// Sequential dot product; shared by the numerator and the norms so that a batch
/// correlated with itself has a diagonal of exactly 1.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Columns as contiguous rows, and their squared norms (0 for degenerate columns).
fn columns(n: &NormalizedBatch) -> (Array2<f64>, Vec<f64>) {
    let cols = n.batch.values().t().as_standard_layout().into_owned();
    let sq = cols
        .axis_iter(Axis(0))
        .zip(&n.degenerate)
        .map(|(col, &deg)| {
            let col = col.as_slice().expect("standard layout");
            if deg { 0.0 } else { dot(col, col) }
        })
        .collect();
    (cols, sq)
}

/// `C[i][j] = Σ_b a[b][i]·b[b][j] / (‖a[:,i]‖·‖b[:,j]‖)`; entries touching a degenerate
/// column are 0.
pub fn cross_correlation(a: &NormalizedBatch, b: &NormalizedBatch) -> Result<CorrelationMatrix> {
    let (av, bv) = (a.batch.values(), b.batch.values());
    if av.dim() != bv.dim() {
        return Err(Error::invalid(format!(
            "embedding shapes differ: {:?} vs {:?}",
            av.dim(),
            bv.dim()
        )));
    }
    let (ca, sa) = columns(a);
    let (cb, sb) = columns(b);
    let k = av.ncols();
    let c = Array2::from_shape_fn((k, k), |(i, j)| {
        let denom = (sa[i] * sb[j]).sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        let x = ca.row(i);
        let y = cb.row(j);
        dot(x.as_slice().expect("standard layout"), y.as_slice().expect("standard layout")) / denom
    });
    Ok(CorrelationMatrix { values: c, provenance: (a.batch.tag(), b.batch.tag()) })
}
