use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gray::GrayImage;
use crate::error::Result;

/// Bright background with dark Gaussian blobs of mixed sizes, a stand-in for a stained
/// section. Deterministic in `seed`.
pub fn synthetic_tissue(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let area = (width * height) as f64;
    let n = ((area / 400.0) as usize).max(4);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(2.0..12.0f64),
                rng.random_range(0.3..1.0),
            )
        })
        .collect();
    GrayImage::from_fn(width, height, |x, y| {
        let mut density = 0.0;
        for &(cx, cy, sigma, amp) in &blobs {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d2 < 16.0 * sigma * sigma {
                density += amp * (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
        0.92 - 0.75 * (1.0 - (-density).exp())
    })
}
