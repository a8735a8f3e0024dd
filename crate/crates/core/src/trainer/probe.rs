use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ProbeConfig;
use super::mlp::Mlp;
use super::synthetic::PairedDataset;
use crate::error::{Error, Result};

/// Test accuracy of a multinomial logistic regression fitted on frozen features.
///
/// Features are standardized with the training split's statistics; the fit is full-batch
/// Adam on cross-entropy with an L2 penalty, so the result is a pure function of the
/// inputs and `cfg.seed`.
pub fn linear_probe_features(
    train_x: &Array2<f64>,
    train_y: &[usize],
    test_x: &Array2<f64>,
    test_y: &[usize],
    n_classes: usize,
    cfg: &ProbeConfig,
) -> Result<f64> {
    if train_x.nrows() != train_y.len() || test_x.nrows() != test_y.len() || train_x.ncols() != test_x.ncols() {
        return Err(Error::invalid("probe feature and label shapes disagree"));
    }
    if test_y.is_empty() || train_y.is_empty() {
        return Err(Error::invalid("probe splits must be nonempty"));
    }
    if train_y.iter().chain(test_y).any(|&y| y >= n_classes) {
        return Err(Error::invalid("label out of range"));
    }
    if train_y.iter().all(|&y| y == train_y[0]) {
        return Err(Error::invalid("probe training split holds a single class"));
    }

    let n = train_x.nrows() as f64;
    let mean = train_x.mean_axis(Axis(0)).expect("nonempty");
    let std = train_x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let standardize = |x: &Array2<f64>| (x - &mean) / &std;
    let xs = standardize(train_x);
    let xt = standardize(test_x);

    let d = xs.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut w = Array2::from_shape_fn((d, n_classes), |_| init.sample(&mut rng));
    let mut b = Array1::<f64>::zeros(n_classes);

    let mut onehot = Array2::<f64>::zeros((train_y.len(), n_classes));
    for (i, &y) in train_y.iter().enumerate() {
        onehot[[i, y]] = 1.0;
    }

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut mw = Array2::<f64>::zeros(w.raw_dim());
    let mut vw = Array2::<f64>::zeros(w.raw_dim());
    let mut mb = Array1::<f64>::zeros(n_classes);
    let mut vb = Array1::<f64>::zeros(n_classes);
    for t in 1..=cfg.iterations {
        let probs = softmax(&(xs.dot(&w) + &b));
        let err = (probs - &onehot) / n;
        let gw = xs.t().dot(&err) + &(&w * cfg.l2);
        let gb = err.sum_axis(Axis(0));
        let c1 = 1.0 - beta1.powi(t as i32);
        let c2 = 1.0 - beta2.powi(t as i32);
        mw = mw * beta1 + &(&gw * (1.0 - beta1));
        vw = vw * beta2 + &(gw.mapv(|g| g * g) * (1.0 - beta2));
        mb = mb * beta1 + &(&gb * (1.0 - beta1));
        vb = vb * beta2 + &(gb.mapv(|g| g * g) * (1.0 - beta2));
        ndarray::Zip::from(&mut w).and(&mw).and(&vw).for_each(|p, &m, &v| {
            *p -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + eps);
        });
        ndarray::Zip::from(&mut b).and(&mb).and(&vb).for_each(|p, &m, &v| {
            *p -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + eps);
        });
    }

    let scores = xt.dot(&w) + &b;
    let correct = scores
        .axis_iter(Axis(0))
        .zip(test_y)
        .filter(|(row, &y)| argmax(row.iter().copied()) == y)
        .count();
    Ok(correct as f64 / test_y.len() as f64)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
        .0
}

fn softmax(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Probe on the H&E observations passed through a frozen encoder.
pub fn linear_probe(encoder: &Mlp, train: &PairedDataset, test: &PairedDataset, cfg: &ProbeConfig) -> Result<f64> {
    linear_probe_features(
        &encoder.forward(&train.h),
        &train.labels,
        &encoder.forward(&test.h),
        &test.labels,
        train.n_classes,
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{generate_synthetic, SyntheticConfig};
    use rand::seq::SliceRandom;

    #[test]
    fn oracle_features_are_nearly_perfect() {
        let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
        let (train, test) = data.split(0.8);
        let acc = linear_probe_features(&train.shared, &train.labels, &test.shared, &test.labels, 4, &ProbeConfig::default()).unwrap();
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn permuted_labels_give_chance() {
        let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
        let (train, test) = data.split(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut train_y = train.labels.clone();
        train_y.shuffle(&mut rng);
        let acc = linear_probe_features(&train.shared, &train_y, &test.shared, &test.labels, 4, &ProbeConfig::default()).unwrap();
        assert!((acc - 0.25).abs() <= 0.05, "{acc}");
    }

    #[test]
    fn deterministic() {
        let data = generate_synthetic(&SyntheticConfig { n_samples: 600, ..Default::default() }).unwrap();
        let (train, test) = data.split(0.8);
        let enc = Mlp::new(&[32, 16], super::super::Activation::Tanh, true, 3);
        let cfg = ProbeConfig::default();
        assert_eq!(
            linear_probe(&enc, &train, &test, &cfg).unwrap().to_bits(),
            linear_probe(&enc, &train, &test, &cfg).unwrap().to_bits()
        );
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::zeros((4, 2));
        let err = linear_probe_features(&x, &[1, 1, 1, 1], &x, &[0, 1, 0, 1], 2, &ProbeConfig::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}
