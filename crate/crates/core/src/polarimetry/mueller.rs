use std::fmt;
use std::ops::Mul;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    pub const fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Self {
        Self { s0, s1, s2, s3 }
    }

    pub const fn unpolarized() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// The unpolarized state followed by the six poles of the Poincaré sphere
    /// (H, V, +45°, −45°, right and left circular).
    pub fn probes() -> [StokesVector; 7] {
        [
            Self::unpolarized(),
            Self::new(1.0, 1.0, 0.0, 0.0),
            Self::new(1.0, -1.0, 0.0, 0.0),
            Self::new(1.0, 0.0, 1.0, 0.0),
            Self::new(1.0, 0.0, -1.0, 0.0),
            Self::new(1.0, 0.0, 0.0, 1.0),
            Self::new(1.0, 0.0, 0.0, -1.0),
        ]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s0, self.s1, self.s2, self.s3]
    }

    pub fn polarized_magnitude(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }

    /// Degree of polarization; zero for a dark beam.
    pub fn degree_of_polarization(&self) -> f64 {
        if self.s0 > 0.0 {
            self.polarized_magnitude() / self.s0
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.is_finite() && self.s0 >= -tol && self.polarized_magnitude() <= self.s0 + tol
    }
}

/// A 4×4 real Mueller matrix, row-major. `m[0][0]` is the transmittance for
/// unpolarized light.
#[derive(Clone, Copy, PartialEq)]
pub struct MuellerMatrix {
    pub m: [[f64; 4]; 4],
}

impl fmt::Debug for MuellerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MuellerMatrix[")?;
        for row in &self.m {
            writeln!(f, "  {:>12.9} {:>12.9} {:>12.9} {:>12.9}", row[0], row[1], row[2], row[3])?;
        }
        write!(f, "]")
    }
}

impl MuellerMatrix {
    pub const fn new(m: [[f64; 4]; 4]) -> Self {
        Self { m }
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0, 1.0, 1.0)
    }

    pub const fn zeros() -> Self {
        Self::new([[0.0; 4]; 4])
    }

    pub const fn diag(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new([
            [a, 0.0, 0.0, 0.0],
            [0.0, b, 0.0, 0.0],
            [0.0, 0.0, c, 0.0],
            [0.0, 0.0, 0.0, d],
        ])
    }

    /// Channel layout of the 16-channel image: channel `c` holds `m[c / 4][c % 4]`.
    pub fn from_channels(ch: &[f64]) -> Self {
        assert_eq!(ch.len(), 16, "a Mueller pixel has 16 channels");
        let mut m = [[0.0; 4]; 4];
        for (c, v) in ch.iter().enumerate() {
            m[c / 4][c % 4] = *v;
        }
        Self::new(m)
    }

    pub fn to_channels(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for c in 0..16 {
            out[c] = self.m[c / 4][c % 4];
        }
        out
    }

    /// Ideal linear polarizer with transmission axis at `theta` radians.
    pub fn linear_polarizer(theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        Self::new([
            [0.5, 0.5 * c, 0.5 * s, 0.0],
            [0.5 * c, 0.5 * c * c, 0.5 * c * s, 0.0],
            [0.5 * s, 0.5 * c * s, 0.5 * s * s, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ])
    }

    /// Linear retarder with phase `retardance` and fast axis at `fast_axis` radians.
    pub fn linear_retarder(retardance: f64, fast_axis: f64) -> Self {
        let (s, c) = (2.0 * fast_axis).sin_cos();
        let (sd, cd) = retardance.sin_cos();
        Self::new([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, c * c + s * s * cd, c * s * (1.0 - cd), -s * sd],
            [0.0, c * s * (1.0 - cd), s * s + c * c * cd, c * sd],
            [0.0, s * sd, -c * sd, cd],
        ])
    }

    /// General retarder: rotation of the Poincaré sphere by `retardance` about the unit
    /// axis `axis`.
    pub fn retarder(retardance: f64, axis: [f64; 3]) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let a = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (sd, cd) = retardance.sin_cos();
        let mut m = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                m.m[i + 1][j + 1] = delta * cd + (1.0 - cd) * a[i] * a[j];
            }
        }
        // antisymmetric part: sum_k eps_ijk a_k sin(R)
        m.m[1][2] += a[2] * sd;
        m.m[2][1] -= a[2] * sd;
        m.m[2][3] += a[0] * sd;
        m.m[3][2] -= a[0] * sd;
        m.m[3][1] += a[1] * sd;
        m.m[1][3] -= a[1] * sd;
        m
    }

    /// Diagonal depolarizer `diag(1, a, b, c)`.
    pub const fn depolarizer(a: f64, b: f64, c: f64) -> Self {
        Self::diag(1.0, a, b, c)
    }

    /// Diattenuator with unit unpolarized transmittance and diattenuation vector `d`
    /// (`|d| < 1`).
    pub fn diattenuator(d: [f64; 3]) -> Self {
        let mag2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        let root = (1.0 - mag2).max(0.0).sqrt();
        let mut m = Self::identity();
        for i in 0..3 {
            m.m[0][i + 1] = d[i];
            m.m[i + 1][0] = d[i];
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let outer = if mag2 > 0.0 { d[i] * d[j] / mag2 } else { 0.0 };
                m.m[i + 1][j + 1] = root * delta + (1.0 - root) * outer;
            }
        }
        m
    }

    /// Frame rotation by `theta` (rotates linear polarization by `2 theta` on the sphere).
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (2.0 * theta).sin_cos();
        Self::new([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, c, s, 0.0],
            [0.0, -s, c, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// The element physically rotated by `theta` about the beam axis.
    pub fn rotated(&self, theta: f64) -> Self {
        Self::rotation(-theta) * *self * Self::rotation(theta)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = *self;
        out.m.iter_mut().flatten().for_each(|v| *v *= k);
        out
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.m[i][i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        let v = s.as_array();
        let row = |i: usize| (0..4).map(|j| self.m[i][j] * v[j]).sum::<f64>();
        StokesVector::new(row(0), row(1), row(2), row(3))
    }
}

impl Mul for MuellerMatrix {
    type Output = MuellerMatrix;

    fn mul(self, rhs: MuellerMatrix) -> MuellerMatrix {
        let mut out = MuellerMatrix::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.m[i][j] = (0..4).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        out
    }
}

pub fn mueller_apply(m: &MuellerMatrix, s: &StokesVector) -> Result<StokesVector> {
    if !m.is_finite() || !s.is_finite() {
        return Err(Error::invalid("non-finite Mueller matrix or Stokes vector"));
    }
    Ok(m.apply(s))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InvalidReason {
    NonFinite,
    ZeroTransmittance,
    /// Index into [`StokesVector::probes`] of an input mapped to an unphysical state.
    UnphysicalOutput { probe: usize },
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::NonFinite => write!(f, "non-finite entries"),
            InvalidReason::ZeroTransmittance => write!(f, "zero transmittance"),
            InvalidReason::UnphysicalOutput { probe } => {
                write!(f, "probe state {probe} maps to an unphysical Stokes vector")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub reasons: Vec<InvalidReason>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.reasons.is_empty()
    }
}

/// Checks positive transmittance and that the seven probe states map to physical Stokes
/// vectors within `tol` (relative to `m[0][0]`).
pub fn validate_mueller(m: &MuellerMatrix, tol: f64) -> ValidityReport {
    assert!(tol > 0.0, "validation tolerance must be positive");
    let mut reasons = Vec::new();
    if !m.is_finite() {
        reasons.push(InvalidReason::NonFinite);
        return ValidityReport { reasons };
    }
    if m.m[0][0] <= 0.0 {
        reasons.push(InvalidReason::ZeroTransmittance);
        return ValidityReport { reasons };
    }
    let scale = m.m[0][0];
    for (probe, s) in StokesVector::probes().iter().enumerate() {
        let out = m.apply(s);
        let ok = out.s0 >= -tol * scale && out.polarized_magnitude() <= out.s0 + tol * scale;
        if !ok {
            reasons.push(InvalidReason::UnphysicalOutput { probe });
        }
    }
    ValidityReport { reasons }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horizontal_polarizer() -> MuellerMatrix {
        MuellerMatrix::new([
            [0.5, 0.5, 0.0, 0.0],
            [0.5, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ])
    }

    #[test]
    fn apply_identity() {
        let s = StokesVector::new(1.0, 0.3, 0.2, 0.1);
        assert_eq!(mueller_apply(&MuellerMatrix::identity(), &s).unwrap(), s);
    }

    #[test]
    fn apply_polarizer_to_unpolarized() {
        let out = mueller_apply(&horizontal_polarizer(), &StokesVector::unpolarized()).unwrap();
        assert_eq!(out, StokesVector::new(0.5, 0.5, 0.0, 0.0));
    }

    #[test]
    fn apply_ideal_depolarizer() {
        let out = mueller_apply(
            &MuellerMatrix::diag(1.0, 0.0, 0.0, 0.0),
            &StokesVector::new(1.0, 0.5, 0.5, 0.0),
        )
        .unwrap();
        assert_eq!(out, StokesVector::new(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn apply_rejects_non_finite() {
        let s = StokesVector::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(mueller_apply(&MuellerMatrix::identity(), &s).is_err());
        let mut m = MuellerMatrix::identity();
        m.m[2][1] = f64::INFINITY;
        assert!(mueller_apply(&m, &StokesVector::unpolarized()).is_err());
    }

    #[test]
    fn constructors_agree() {
        assert!(
            MuellerMatrix::linear_polarizer(0.0).frobenius_distance(&horizontal_polarizer()) < 1e-15
        );
        for &(delta, theta) in &[(0.3, 0.0), (1.2, 0.4), (2.9, -1.1)] {
            let direct = MuellerMatrix::linear_retarder(delta, theta);
            let rotated = MuellerMatrix::linear_retarder(delta, 0.0).rotated(theta);
            assert!(direct.frobenius_distance(&rotated) < 1e-14);
            let (s, c) = (2.0 * theta).sin_cos();
            let general = MuellerMatrix::retarder(delta, [c, s, 0.0]);
            assert!(direct.frobenius_distance(&general) < 1e-14);
        }
    }

    #[test]
    fn validation() {
        assert!(validate_mueller(&MuellerMatrix::identity(), 1e-9).is_valid());
        assert!(validate_mueller(&horizontal_polarizer(), 1e-9).is_valid());

        let report = validate_mueller(&MuellerMatrix::zeros(), 1e-9);
        assert!(!report.is_valid());
        assert_eq!(report.reasons[0].to_string(), "zero transmittance");

        // amplifies polarization beyond the intensity
        let report = validate_mueller(&MuellerMatrix::diag(1.0, 1.5, 1.0, 1.0), 1e-9);
        assert_eq!(report.reasons, vec![
            InvalidReason::UnphysicalOutput { probe: 1 },
            InvalidReason::UnphysicalOutput { probe: 2 },
        ]);
    }

    #[test]
    fn channel_layout_row_major() {
        let ch: Vec<f64> = (0..16).map(f64::from).collect();
        let m = MuellerMatrix::from_channels(&ch);
        assert_eq!(m.m[1][2], 6.0);
        assert_eq!(m.m[3][0], 12.0);
        assert_eq!(m.to_channels().to_vec(), ch);
    }
}
