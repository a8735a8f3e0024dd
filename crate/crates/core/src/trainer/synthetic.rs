use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::SyntheticConfig;
use crate::error::Result;

/// Paired observations with their generating shared factors and downstream labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub h: Array2<f64>,
    pub p: Array2<f64>,
    pub shared: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> PairedDataset {
        PairedDataset {
            h: self.h.slice(s![start..end, ..]).to_owned(),
            p: self.p.slice(s![start..end, ..]).to_owned(),
            shared: self.shared.slice(s![start..end, ..]).to_owned(),
            labels: self.labels[start..end].to_vec(),
            n_classes: self.n_classes,
        }
    }

    /// Leading `fraction` of the rows and the remainder.
    pub fn split(&self, fraction: f64) -> (PairedDataset, PairedDataset) {
        let cut = ((self.len() as f64 * fraction).round() as usize).clamp(1, self.len() - 1);
        (self.slice(0, cut), self.slice(cut, self.len()))
    }
}

// Independent RNG streams derived from the one config seed.
const STREAM_MIX_H: u64 = 1;
const STREAM_MIX_P: u64 = 2;
const STREAM_LABELS: u64 = 3;
const STREAM_LATENT: u64 = 4;
const STREAM_NOISE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Mixing matrix `obs × (n_shared + n_unique)` with unit-variance pre-activations when
/// `unique_scale = 1`.
fn mixing(seed: u64, id: u64, obs: usize, n_shared: usize, n_unique: usize, unique_scale: f64) -> Array2<f64> {
    let mut rng = stream(seed, id);
    let n_in = (n_shared + n_unique) as f64;
    let mut a = gaussian(&mut rng, obs, n_shared + n_unique, 1.0 / n_in.sqrt());
    a.slice_mut(s![.., n_shared..]).mapv_inplace(|v| v * unique_scale);
    a
}

/// Latents `z ~ N(0, I)`; `H = tanh(A_h·[z_s; z_uh]) + ε`, `P = tanh(A_p·[z_s; z_up]) + ε`;
/// label = argmax of `n_classes` fixed linear functionals of `z_s`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<PairedDataset> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let a_h = mixing(cfg.seed, STREAM_MIX_H, cfg.obs_dim_h, cfg.n_shared, cfg.n_unique_h, cfg.unique_mixing_scale);
    let a_p = mixing(cfg.seed, STREAM_MIX_P, cfg.obs_dim_p, cfg.n_shared, cfg.n_unique_p, cfg.unique_mixing_scale);

    // Centered unit functionals keep the classes roughly balanced.
    let mut w = gaussian(&mut stream(cfg.seed, STREAM_LABELS), cfg.n_classes, cfg.n_shared, 1.0);
    let mean: Array1<f64> = w.mean_axis(Axis(0)).expect("n_classes >= 1");
    w -= &mean;
    for mut row in w.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }

    let mut latent_rng = stream(cfg.seed, STREAM_LATENT);
    let shared = gaussian(&mut latent_rng, n, cfg.n_shared, 1.0);
    let unique_h = gaussian(&mut latent_rng, n, cfg.n_unique_h, 1.0);
    let unique_p = gaussian(&mut latent_rng, n, cfg.n_unique_p, 1.0);

    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let mut observe = |unique: &Array2<f64>, a: &Array2<f64>| {
        let z = concatenate![Axis(1), shared, *unique];
        let mut x = z.dot(&a.t()).mapv(f64::tanh);
        if cfg.noise_std > 0.0 {
            x += &gaussian(&mut noise_rng, x.nrows(), x.ncols(), cfg.noise_std);
        }
        x
    };
    let h = observe(&unique_h, &a_h);
    let p = observe(&unique_p, &a_p);

    let scores = shared.dot(&w.t());
    let labels = scores
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect();

    Ok(PairedDataset { h, p, shared, labels, n_classes: cfg.n_classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_a_seed() {
        let cfg = SyntheticConfig { noise_std: 0.0, n_samples: 200, ..Default::default() };
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let noisy = SyntheticConfig { n_samples: 200, ..Default::default() };
        assert_eq!(generate_synthetic(&noisy).unwrap(), generate_synthetic(&noisy).unwrap());
        let other = SyntheticConfig { seed: 8, ..noisy.clone() };
        assert_ne!(generate_synthetic(&noisy).unwrap().h, generate_synthetic(&other).unwrap().h);
    }

    #[test]
    fn zero_unique_mixing_makes_modalities_functions_of_shared() {
        let cfg = SyntheticConfig {
            n_unique_h: 1,
            n_unique_p: 1,
            unique_mixing_scale: 0.0,
            noise_std: 0.0,
            n_samples: 300,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let a_h = mixing(cfg.seed, STREAM_MIX_H, cfg.obs_dim_h, cfg.n_shared, 1, 0.0);
        let a_p = mixing(cfg.seed, STREAM_MIX_P, cfg.obs_dim_p, cfg.n_shared, 1, 0.0);
        let from_shared = |a: &Array2<f64>| data.shared.dot(&a.slice(s![.., ..cfg.n_shared]).t()).mapv(f64::tanh);
        let dh = (&data.h - &from_shared(&a_h)).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        let dp = (&data.p - &from_shared(&a_p)).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
        assert!(dh < 1e-12 && dp < 1e-12, "{dh} {dp}");
    }

    #[test]
    fn labels_roughly_balanced() {
        let cfg = SyntheticConfig { n_samples: 10_000, ..Default::default() };
        let data = generate_synthetic(&cfg).unwrap();
        let mut counts = vec![0usize; 4];
        for &l in &data.labels {
            counts[l] += 1;
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((0.15..=0.35).contains(&freq), "class frequency {freq}");
        }
    }

    #[test]
    fn split_is_disjoint_and_covering() {
        let data = generate_synthetic(&SyntheticConfig { n_samples: 10, ..Default::default() }).unwrap();
        let (a, b) = data.split(0.8);
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(b.h.row(0), data.h.row(8));
    }
}
