//! Lu–Chipman polar decomposition `M = M_Δ · M_R · M_D` and the optical properties
//! derived from its factors.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

use super::mueller::MuellerMatrix;

/// Matrices with `m[0][0]` at or below this are treated as opaque.
pub const MIN_TRANSMITTANCE: f64 = 1e-12;

/// Fast axis is reported as 0 below this retardance.
pub const ZERO_RETARDANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DecompositionFailure {
    #[error("non-finite matrix entries")]
    NonFinite,
    #[error("transmittance {0:e} is not positive")]
    ZeroTransmittance(f64),
    #[error("diattenuation magnitude {0} is not below 1")]
    Diattenuation(f64),
    #[error("unphysical Mueller matrix")]
    Unphysical,
}

impl DecompositionFailure {
    /// Short stable code, suitable for per-pixel diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            DecompositionFailure::NonFinite => "non_finite",
            DecompositionFailure::ZeroTransmittance(_) => "zero_transmittance",
            DecompositionFailure::Diattenuation(_) => "diattenuation",
            DecompositionFailure::Unphysical => "unphysical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarDecomposition {
    pub depolarizer: MuellerMatrix,
    pub retarder: MuellerMatrix,
    pub diattenuator: MuellerMatrix,
}

impl PolarDecomposition {
    pub fn product(&self) -> MuellerMatrix {
        self.depolarizer * self.retarder * self.diattenuator
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarProperties {
    /// Radians in `[0, π]`.
    pub retardance: f64,
    /// Radians in `[-π/2, π/2)`.
    pub fast_axis: f64,
    /// In `[0, 1]`.
    pub depolarization: f64,
}

fn lower_block(m: &MuellerMatrix) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m.m[i + 1][j + 1])
}

fn embed(top_left: f64, row: Vector3<f64>, col: Vector3<f64>, block: &Matrix3<f64>) -> MuellerMatrix {
    let mut m = MuellerMatrix::zeros();
    m.m[0][0] = top_left;
    for i in 0..3 {
        m.m[0][i + 1] = row[i];
        m.m[i + 1][0] = col[i];
        for j in 0..3 {
            m.m[i + 1][j + 1] = block[(i, j)];
        }
    }
    m
}

/// Factors `m / m[0][0]` into depolarizer · retarder · diattenuator.
///
/// The retarder block is the orthogonal polar factor of the depolarizing-retarder block
/// `m'`, taken from its SVD so that rank-deficient (strongly depolarizing) pixels still
/// decompose. When `det m' < 0` the smallest singular direction is flipped so the retarder
/// stays a proper rotation and the depolarizer absorbs the sign.
pub fn lu_chipman_decompose(m: &MuellerMatrix) -> Result<PolarDecomposition, DecompositionFailure> {
    if !m.is_finite() {
        return Err(DecompositionFailure::NonFinite);
    }
    let m00 = m.m[0][0];
    if m00 <= MIN_TRANSMITTANCE {
        return Err(DecompositionFailure::ZeroTransmittance(m00));
    }
    let m = m.scaled(1.0 / m00);

    let d = Vector3::new(m.m[0][1], m.m[0][2], m.m[0][3]);
    let d_mag = d.norm();
    if d_mag >= 1.0 {
        return Err(DecompositionFailure::Diattenuation(d_mag));
    }

    let root = (1.0 - d_mag * d_mag).sqrt();
    let m_d_block = if d_mag > 0.0 {
        let unit = d / d_mag;
        Matrix3::identity() * root + unit * unit.transpose() * (1.0 - root)
    } else {
        Matrix3::identity()
    };
    let diattenuator = embed(1.0, d, d, &m_d_block);

    // M' = M · M_D⁻¹ = [[1, 0], [P_Δ, m']]
    let to_na = |m: &MuellerMatrix| Matrix4::from_fn(|i, j| m.m[i][j]);
    let m_d_inv = to_na(&diattenuator)
        .try_inverse()
        .ok_or(DecompositionFailure::Unphysical)?;
    let m_prime_full = to_na(&m) * m_d_inv;
    let p_delta = Vector3::new(m_prime_full[(1, 0)], m_prime_full[(2, 0)], m_prime_full[(3, 0)]);
    let m_prime = Matrix3::from_fn(|i, j| m_prime_full[(i + 1, j + 1)]);
    if !m_prime.iter().all(|v| v.is_finite()) || !p_delta.iter().all(|v| v.is_finite()) {
        return Err(DecompositionFailure::Unphysical);
    }

    let svd = m_prime.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(DecompositionFailure::Unphysical),
    };
    let mut sigma = svd.singular_values;
    let mut u_fixed = u;
    if (u * v_t).determinant() < 0.0 {
        let k = sigma.imin();
        sigma[k] = -sigma[k];
        u_fixed.column_mut(k).neg_mut();
    }
    let ret_block = u_fixed * v_t;
    // depol_block · ret_block = u_fixed · Σ · v_t = m'
    let depol_block = u_fixed * Matrix3::from_diagonal(&sigma) * u_fixed.transpose();

    let zero = Vector3::zeros();
    Ok(PolarDecomposition {
        depolarizer: embed(1.0, zero, p_delta, &depol_block),
        retarder: embed(1.0, zero, zero, &ret_block),
        diattenuator,
    })
}

/// Retardance, fast-axis orientation and depolarization power of `m`.
pub fn derive_properties(m: &MuellerMatrix) -> Result<PolarProperties, DecompositionFailure> {
    let dec = lu_chipman_decompose(m)?;
    let r = lower_block(&dec.retarder);
    let cos_r = ((dec.retarder.trace() / 2.0) - 1.0).clamp(-1.0, 1.0);
    let retardance = cos_r.acos().clamp(0.0, PI);

    let fast_axis = if retardance < ZERO_RETARDANCE {
        0.0
    } else {
        let axis = retardance_axis(&r, retardance);
        let mut angle = 0.5 * axis[1].atan2(axis[0]);
        if angle >= FRAC_PI_2 {
            angle -= PI;
        }
        angle
    };

    let depol_block = lower_block(&dec.depolarizer);
    let depolarization = (1.0 - depol_block.trace().abs() / 3.0).clamp(0.0, 1.0);

    Ok(PolarProperties { retardance, fast_axis, depolarization })
}

/// Unit rotation axis of the retarder block (the normalized retardance vector).
fn retardance_axis(r: &Matrix3<f64>, retardance: f64) -> Vector3<f64> {
    let sin_r = retardance.sin();
    if sin_r > 1e-6 {
        let a = Vector3::new(r[(1, 2)] - r[(2, 1)], r[(2, 0)] - r[(0, 2)], r[(0, 1)] - r[(1, 0)]);
        return a / (2.0 * sin_r);
    }
    // Near a half turn the antisymmetric part vanishes; use a·aᵀ = (sym(r) − cos R·I)/(1 − cos R).
    let cos_r = retardance.cos();
    let outer = ((r + r.transpose()) * 0.5 - Matrix3::identity() * cos_r) / (1.0 - cos_r);
    let k = outer.diagonal().imax();
    let col = outer.column(k).into_owned();
    let mut a = col / outer[(k, k)].max(f64::MIN_POSITIVE).sqrt();
    // the axis sign is unobservable at a half turn; pick a1 >= 0 (then a2 >= 0)
    if a[0] < 0.0 || (a[0] == 0.0 && a[1] < 0.0) {
        a = -a;
    }
    a
}
