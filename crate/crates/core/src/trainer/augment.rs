use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector-valued stand-in for image flips/rotations: additive Gaussian noise followed by
/// zeroing a random subset of coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentParams {
    pub noise_std: f64,
    pub mask_fraction: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self { noise_std: 0.1, mask_fraction: 0.1 }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0) || !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(Error::invalid("augmentation needs noise_std >= 0 and mask_fraction in [0, 1]"));
        }
        Ok(())
    }
}

/// Augments every row of `x`. Each coordinate is masked independently with probability
/// `mask_fraction`.
pub fn augment<R: Rng + ?Sized>(x: &Array2<f64>, params: &AugmentParams, rng: &mut R) -> Array2<f64> {
    let mut out = x.clone();
    if params.noise_std > 0.0 {
        out.mapv_inplace(|v| v + params.noise_std * rng.sample::<f64, _>(StandardNormal));
    }
    if params.mask_fraction >= 1.0 {
        out.fill(0.0);
    } else if params.mask_fraction > 0.0 {
        out.mapv_inplace(|v| if rng.random::<f64>() < params.mask_fraction { 0.0 } else { v });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_without_noise_or_masking() {
        let x = array![[1.0, -2.0, 3.5], [0.1, 0.2, 0.3]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = AugmentParams { noise_std: 0.0, mask_fraction: 0.0 };
        assert_eq!(augment(&x, &params, &mut rng), x);
    }

    #[test]
    fn full_masking_zeroes() {
        let x = array![[1.0, -2.0, 3.5]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = AugmentParams { noise_std: 0.5, mask_fraction: 1.0 };
        assert_eq!(augment(&x, &params, &mut rng), Array2::<f64>::zeros((1, 3)));
    }

    #[test]
    fn seeded_views_reproduce_and_differ() {
        let x = Array2::from_elem((4, 8), 1.0);
        let p = AugmentParams::default();
        let a = augment(&x, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let b = augment(&x, &p, &mut ChaCha8Rng::seed_from_u64(3));
        let c = augment(&x, &p, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn mask_rate_close_to_fraction() {
        let x = Array2::from_elem((100, 100), 1.0);
        let p = AugmentParams { noise_std: 0.0, mask_fraction: 0.3 };
        let out = augment(&x, &p, &mut ChaCha8Rng::seed_from_u64(9));
        let zeros = out.iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((zeros - 0.3).abs() < 0.03, "{zeros}");
    }
}
