use super::gray::GrayImage;
use crate::error::{Error, Result};

/// Default half-width of the illumination-estimate window.
pub const DEFAULT_FLAT_FIELD_RADIUS: usize = 15;

/// Mean over the `(2r+1)²` window around each pixel, restricted to in-bounds pixels.
pub fn box_mean(img: &GrayImage, radius: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    // summed-area table with a zero first row and column
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += img.get(x, y);
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius + 1).min(w));
            let s = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
            out.push(s / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }
    out
}

/// Divides out a box-filtered illumination estimate, restores the global mean and clamps
/// to `[0, 1]`. Pixels whose neighborhood is entirely dark stay 0.
pub fn flat_field_correct(img: &GrayImage, radius: usize) -> Result<GrayImage> {
    let mean = img.mean();
    if mean <= 0.0 {
        return Err(Error::invalid("flat-field correction of an all-zero image"));
    }
    let illum = box_mean(img, radius);
    let ratio: Vec<f64> = img
        .data()
        .iter()
        .zip(&illum)
        .map(|(&v, &l)| if l > 0.0 { v / l } else { 0.0 })
        .collect();
    let ratio_mean = ratio.iter().sum::<f64>() / ratio.len() as f64;
    let k = mean / ratio_mean;
    GrayImage::new(img.width(), img.height(), ratio.iter().map(|r| (r * k).clamp(0.0, 1.0)).collect())
}
