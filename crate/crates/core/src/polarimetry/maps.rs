use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::PmmRaster;

use super::decompose::derive_properties;
use super::image::MuellerImage;
use super::mueller::validate_mueller;

/// Probe tolerance (relative to `m00`) applied per pixel before decomposition.
pub const VALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarPropertyMaps {
    pub width: usize,
    pub height: usize,
    pub retardance: Vec<f64>,
    pub fast_axis: Vec<f64>,
    pub depolarization: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl PolarPropertyMaps {
    /// A single map as a one-channel PMM raster.
    pub fn to_pmm(&self, map: &[f64]) -> PmmRaster {
        PmmRaster {
            width: self.width as u32,
            height: self.height as u32,
            channels: 1,
            data: map.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Per-pixel decomposition. Pixels failing validation or decomposition are masked and
/// carry 0 in every map.
pub fn property_maps(img: &MuellerImage) -> PolarPropertyMaps {
    let n = img.width() * img.height();
    let props: Vec<Option<(f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let m = img.pixel(i % img.width(), i / img.width());
            if m.m[0][0] <= super::decompose::MIN_TRANSMITTANCE {
                return None;
            }
            let normalized = m.scaled(1.0 / m.m[0][0]);
            if !validate_mueller(&normalized, VALIDATION_TOL).is_valid() {
                return None;
            }
            derive_properties(&normalized)
                .ok()
                .map(|p| (p.retardance, p.fast_axis, p.depolarization))
        })
        .collect();

    let mut maps = PolarPropertyMaps {
        width: img.width(),
        height: img.height(),
        retardance: vec![0.0; n],
        fast_axis: vec![0.0; n],
        depolarization: vec![0.0; n],
        valid_mask: vec![false; n],
    };
    for (i, p) in props.into_iter().enumerate() {
        if let Some((r, f, d)) = p {
            maps.retardance[i] = r;
            maps.fast_axis[i] = f;
            maps.depolarization[i] = d;
            maps.valid_mask[i] = true;
        }
    }
    maps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderStyle {
    /// `[lo, hi]` mapped affinely onto `[0, 255]`, clamped.
    Linear,
    /// `hi - lo` is one period; rendered as a triangle wave so both ends of the period
    /// share a grey level.
    Cyclic,
}

pub fn render_map(map: &[f64], range: (f64, f64), style: RenderStyle) -> Result<Vec<u8>> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::invalid(format!("render range ({lo}, {hi}) is empty")));
    }
    let span = hi - lo;
    Ok(map
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return 0;
            }
            let t = match style {
                RenderStyle::Linear => ((v - lo) / span).clamp(0.0, 1.0),
                RenderStyle::Cyclic => {
                    let phase = ((v - lo) / span).rem_euclid(1.0);
                    1.0 - (2.0 * phase - 1.0).abs()
                }
            };
            (t * 255.0).round() as u8
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarimetry::MuellerMatrix;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn qwp() -> MuellerMatrix {
        MuellerMatrix::linear_retarder(FRAC_PI_2, 0.0)
    }

    #[test]
    fn identity_image() {
        let maps = property_maps(&MuellerImage::filled(2, 2, &MuellerMatrix::identity()));
        assert_eq!(maps.valid_mask, vec![true; 4]);
        assert!(maps.retardance.iter().chain(&maps.fast_axis).chain(&maps.depolarization).all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_quarter_wave() {
        let maps = property_maps(&MuellerImage::filled(1, 1, &qwp()));
        assert!((maps.retardance[0] - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn zero_pixel_masked() {
        let maps = property_maps(&MuellerImage::filled(1, 1, &MuellerMatrix::zeros()));
        assert_eq!(maps.valid_mask, vec![false]);
        assert_eq!((maps.retardance[0], maps.fast_axis[0], maps.depolarization[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unphysical_pixel_masked() {
        let img = MuellerImage::filled(1, 1, &MuellerMatrix::diag(1.0, 2.0, 1.0, 1.0));
        assert_eq!(property_maps(&img).valid_mask, vec![false]);
    }

    #[test]
    fn matches_pixelwise_derivation() {
        let img = MuellerImage::from_fn(7, 5, |x, y| {
            MuellerMatrix::depolarizer(0.9, 0.8, 0.7)
                * MuellerMatrix::linear_retarder(0.2 * x as f64, 0.1 * y as f64 - 0.2)
        });
        let maps = property_maps(&img);
        for y in 0..5 {
            for x in 0..7 {
                let p = derive_properties(&img.pixel(x, y)).unwrap();
                let i = y * 7 + x;
                assert_eq!(maps.retardance[i].to_bits(), p.retardance.to_bits());
                assert_eq!(maps.fast_axis[i].to_bits(), p.fast_axis.to_bits());
                assert_eq!(maps.depolarization[i].to_bits(), p.depolarization.to_bits());
            }
        }
    }

    #[test]
    fn linear_render_ends() {
        assert_eq!(render_map(&[0.3; 4], (0.3, 1.0), RenderStyle::Linear).unwrap(), vec![0; 4]);
        assert_eq!(render_map(&[1.0; 4], (0.3, 1.0), RenderStyle::Linear).unwrap(), vec![255; 4]);
        assert_eq!(render_map(&[-5.0, 5.0], (0.0, 1.0), RenderStyle::Linear).unwrap(), vec![0, 255]);
    }

    #[test]
    fn cyclic_render_wraps() {
        let px = render_map(&[-FRAC_PI_2, FRAC_PI_2 - 1e-6], (-FRAC_PI_2, FRAC_PI_2), RenderStyle::Cyclic)
            .unwrap();
        assert!((px[0] as i32 - px[1] as i32).abs() <= 1);
        let mid = render_map(&[0.0], (-FRAC_PI_2, FRAC_PI_2), RenderStyle::Cyclic).unwrap();
        assert_eq!(mid, vec![255]);
    }

    #[test]
    fn empty_range_rejected() {
        assert!(render_map(&[0.0], (PI, PI), RenderStyle::Linear).is_err());
    }
}
