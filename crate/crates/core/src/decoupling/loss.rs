use std::ops::Range;

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::batch::{batch_normalize, EmbeddingBatch, NormalizedBatch, BN_EPS};
use super::correlation::{cross_correlation, CorrelationMatrix};
use crate::error::{Error, Result};

/// Shared trade-off weight for all off-diagonal terms.
pub const DEFAULT_LAMBDA: f64 = 0.0051;

/// Split of the `k_total` embedding dimensions: the first `k_common` are common, the
/// remaining `k_unique` are modality-unique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub k_total: usize,
    pub k_common: usize,
    pub k_unique: usize,
}

impl PartitionConfig {
    pub fn new(k_total: usize, k_common: usize) -> Result<Self> {
        let part = Self { k_total, k_common, k_unique: k_total.saturating_sub(k_common) };
        part.validate()?;
        Ok(part)
    }

    /// `k_common = round(ratio · k_total)`, kept inside `[1, k_total − 1]`.
    pub fn from_ratio(k_total: usize, ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) || k_total < 2 {
            return Err(Error::invalid(format!("cannot split {k_total} dims at ratio {ratio}")));
        }
        let k_common = ((ratio * k_total as f64).round() as usize).clamp(1, k_total - 1);
        Self::new(k_total, k_common)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_common < 1 || self.k_unique < 1 || self.k_common + self.k_unique != self.k_total {
            return Err(Error::invalid(format!(
                "invalid partition: k_total {} = k_common {} + k_unique {} with both >= 1",
                self.k_total, self.k_common, self.k_unique
            )));
        }
        Ok(())
    }

    pub fn common_range(&self) -> Range<usize> {
        0..self.k_common
    }

    pub fn unique_range(&self) -> Range<usize> {
        self.k_common..self.k_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_u: f64,
    pub lambda_h: f64,
    pub lambda_p: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_c: DEFAULT_LAMBDA,
            lambda_u: DEFAULT_LAMBDA,
            lambda_h: DEFAULT_LAMBDA,
            lambda_p: DEFAULT_LAMBDA,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_c, self.lambda_u, self.lambda_h, self.lambda_p];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!("loss weights must be finite and >= 0: {all:?}")));
        }
        Ok(())
    }
}

/// Which cross-modal view pairs feed the common and unique terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossPairing {
    /// Average over `(h1, p1)` and `(h2, p2)`.
    #[default]
    BothViews,
    /// `(h1, p1)` only.
    FirstView,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossOptions {
    pub weights: LossWeights,
    pub pairing: CrossPairing,
    /// When false the cross-modal redundancy term runs over all `K` dimensions and the
    /// unique term is dropped.
    pub decouple: bool,
    /// When false the intra-modal terms are dropped.
    pub intra: bool,
    pub eps: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            pairing: CrossPairing::default(),
            decouple: true,
            intra: true,
            eps: BN_EPS,
        }
    }
}

/// A scalar loss and its gradient with respect to every entry of the correlation matrix it
/// was evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// `Σ_i (t − C_ii)² + λ·Σ_{i≠j} C_ij²` over the diagonal block `range`.
fn redundancy_term(c: &Array2<f64>, range: Range<usize>, diag_target: f64, lambda: f64) -> LossTerm {
    let mut grad = Array2::zeros(c.raw_dim());
    let mut on_diag = 0.0;
    let mut off_diag = 0.0;
    for i in range.clone() {
        for j in range.clone() {
            let v = c[[i, j]];
            if i == j {
                on_diag += (diag_target - v) * (diag_target - v);
                grad[[i, j]] = 2.0 * (v - diag_target);
            } else {
                off_diag += v * v;
                grad[[i, j]] = 2.0 * lambda * v;
            }
        }
    }
    LossTerm { value: on_diag + lambda * off_diag, grad }
}

/// Cross-modal alignment of the leading `k_common × k_common` block.
pub fn loss_common(c_full: &CorrelationMatrix, part: &PartitionConfig, lambda_c: f64) -> Result<LossTerm> {
    if part.k_common > c_full.order() {
        return Err(Error::invalid(format!(
            "k_common {} exceeds correlation order {}",
            part.k_common,
            c_full.order()
        )));
    }
    Ok(redundancy_term(c_full.values(), 0..part.k_common, 1.0, lambda_c))
}

/// Cross-modal decorrelation of the trailing `k_unique × k_unique` block.
pub fn loss_unique(c_full: &CorrelationMatrix, part: &PartitionConfig, lambda_u: f64) -> Result<LossTerm> {
    let order = c_full.order();
    if part.k_unique > order {
        return Err(Error::invalid(format!(
            "k_unique {} exceeds correlation order {order}",
            part.k_unique
        )));
    }
    Ok(redundancy_term(c_full.values(), order - part.k_unique..order, 0.0, lambda_u))
}

/// Redundancy reduction between two views of one modality over every dimension.
pub fn loss_intra(c_same: &CorrelationMatrix, lambda_m: f64) -> Result<LossTerm> {
    Ok(redundancy_term(c_same.values(), 0..c_same.order(), 1.0, lambda_m))
}

/// Gradients of `l_total` with respect to the four raw (pre-normalization) batches.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrads {
    pub h1: Array2<f64>,
    pub h2: Array2<f64>,
    pub p1: Array2<f64>,
    pub p2: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l_com: f64,
    pub l_uni: f64,
    pub l_h: f64,
    pub l_p: f64,
    pub l_total: f64,
    pub grads: Option<EmbeddingGrads>,
}

/// Column-normalized, centered copy of a raw batch (`u = y / ‖y‖`, `y = x − mean`), plus
/// the inverse norms needed to pull gradients back through it.
struct UnitColumns {
    u: Array2<f64>,
    inv_norm: Vec<f64>,
}

impl UnitColumns {
    fn new(raw: &EmbeddingBatch, normalized: &NormalizedBatch) -> Self {
        let b = raw.batch_size() as f64;
        let mut u = raw.values().clone();
        let mut inv_norm = vec![0.0; raw.dim()];
        for (k, mut col) in u.axis_iter_mut(Axis(1)).enumerate() {
            let mean = col.sum() / b;
            col.mapv_inplace(|v| v - mean);
            let norm = col.dot(&col).sqrt();
            if normalized.degenerate[k] || norm == 0.0 {
                col.fill(0.0);
            } else {
                inv_norm[k] = 1.0 / norm;
                col.mapv_inplace(|v| v / norm);
            }
        }
        Self { u, inv_norm }
    }

    /// `∂L/∂x` from `∂L/∂u`, column by column: project out `u`, scale by `1/‖y‖`, then
    /// remove the mean (the centering step's Jacobian).
    fn backward(&self, grad_u: &Array2<f64>) -> Array2<f64> {
        let mut out = grad_u.clone();
        let b = out.nrows() as f64;
        for (k, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let inv = self.inv_norm[k];
            if inv == 0.0 {
                col.fill(0.0);
                continue;
            }
            let u = self.u.column(k);
            let along = u.dot(&col);
            col.zip_mut_with(&u, |g, &uk| *g = (*g - uk * along) * inv);
            let mean = col.sum() / b;
            col.mapv_inplace(|g| g - mean);
        }
        out
    }
}

/// Full objective `l_com + l_uni + l_h + l_p` over the four embedding batches.
pub fn loss_total(
    fh1: &EmbeddingBatch,
    fh2: &EmbeddingBatch,
    fp1: &EmbeddingBatch,
    fp2: &EmbeddingBatch,
    part: &PartitionConfig,
    opts: &LossOptions,
    with_grad: bool,
) -> Result<LossReport> {
    part.validate()?;
    opts.weights.validate()?;
    let shape = fh1.values().dim();
    for other in [fh2, fp1, fp2] {
        if other.values().dim() != shape {
            return Err(Error::invalid(format!(
                "embedding shapes differ: {shape:?} vs {:?}",
                other.values().dim()
            )));
        }
    }
    if shape.1 != part.k_total {
        return Err(Error::invalid(format!(
            "embedding dimension {} does not match partition k_total {}",
            shape.1, part.k_total
        )));
    }

    let nh1 = batch_normalize(fh1, opts.eps)?;
    let nh2 = batch_normalize(fh2, opts.eps)?;
    let np1 = batch_normalize(fp1, opts.eps)?;
    let np2 = batch_normalize(fp2, opts.eps)?;
    let w = &opts.weights;

    let cross_pairs: Vec<(&NormalizedBatch, &NormalizedBatch)> = match opts.pairing {
        CrossPairing::BothViews => vec![(&nh1, &np1), (&nh2, &np2)],
        CrossPairing::FirstView => vec![(&nh1, &np1)],
    };
    let pair_weight = 1.0 / cross_pairs.len() as f64;
    let all_common = PartitionConfig { k_total: part.k_total, k_common: part.k_total, k_unique: 0 };

    let mut l_com = 0.0;
    let mut l_uni = 0.0;
    // correlation-space gradients per cross pair, in `cross_pairs` order
    let mut cross_grads = Vec::with_capacity(cross_pairs.len());
    for (a, b) in &cross_pairs {
        let c = cross_correlation(a, b)?;
        let mut g;
        if opts.decouple {
            let com = loss_common(&c, part, w.lambda_c)?;
            let uni = loss_unique(&c, part, w.lambda_u)?;
            l_com += pair_weight * com.value;
            l_uni += pair_weight * uni.value;
            g = com.grad;
            g += &uni.grad;
        } else {
            let com = loss_common(&c, &all_common, w.lambda_c)?;
            l_com += pair_weight * com.value;
            g = com.grad;
        }
        g *= pair_weight;
        cross_grads.push(g);
    }

    let (mut l_h, mut l_p) = (0.0, 0.0);
    let mut intra_grads = None;
    if opts.intra {
        let h = loss_intra(&cross_correlation(&nh1, &nh2)?, w.lambda_h)?;
        let p = loss_intra(&cross_correlation(&np1, &np2)?, w.lambda_p)?;
        l_h = h.value;
        l_p = p.value;
        intra_grads = Some((h.grad, p.grad));
    }

    let l_total = l_com + l_uni + l_h + l_p;
    if !l_total.is_finite() {
        return Err(Error::invalid("objective is not finite"));
    }

    let grads = with_grad.then(|| {
        let uh1 = UnitColumns::new(fh1, &nh1);
        let uh2 = UnitColumns::new(fh2, &nh2);
        let up1 = UnitColumns::new(fp1, &np1);
        let up2 = UnitColumns::new(fp2, &np2);
        let zeros = || Array2::<f64>::zeros(shape);
        let (mut gh1, mut gh2, mut gp1, mut gp2) = (zeros(), zeros(), zeros(), zeros());

        // C = Uaᵀ·Ub  ⇒  ∂L/∂Ua = Ub·Gᵀ, ∂L/∂Ub = Ua·G
        let accumulate = |ga: &mut Array2<f64>, gb: &mut Array2<f64>, ua: &UnitColumns, ub: &UnitColumns, g: &Array2<f64>| {
            *ga += &ub.u.dot(&g.t());
            *gb += &ua.u.dot(g);
        };
        accumulate(&mut gh1, &mut gp1, &uh1, &up1, &cross_grads[0]);
        if cross_grads.len() > 1 {
            accumulate(&mut gh2, &mut gp2, &uh2, &up2, &cross_grads[1]);
        }
        if let Some((gh, gp)) = &intra_grads {
            accumulate(&mut gh1, &mut gh2, &uh1, &uh2, gh);
            accumulate(&mut gp1, &mut gp2, &up1, &up2, gp);
        }
        EmbeddingGrads {
            h1: uh1.backward(&gh1),
            h2: uh2.backward(&gh2),
            p1: up1.backward(&gp1),
            p2: up2.backward(&gp2),
        }
    });

    Ok(LossReport { l_com, l_uni, l_h, l_p, l_total, grads })
}

/// Leading/trailing square blocks, handy for reporting.
pub(crate) fn block(c: &Array2<f64>, range: Range<usize>) -> Array2<f64> {
    c.slice(s![range.clone(), range]).to_owned()
}
