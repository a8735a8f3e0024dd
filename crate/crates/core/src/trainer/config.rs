use serde::{Deserialize, Serialize};

use super::augment::AugmentParams;
use super::mlp::Activation;
use crate::decoupling::{LossOptions, PartitionConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_shared: usize,
    pub n_unique_h: usize,
    pub n_unique_p: usize,
    pub obs_dim_h: usize,
    pub obs_dim_p: usize,
    /// Seeds the mixing matrices, label functionals and the latent draws.
    pub seed: u64,
    pub noise_std: f64,
    pub n_samples: usize,
    pub n_classes: usize,
    /// Multiplies the mixing columns of the unique factors; 0 makes both observations
    /// functions of the shared factors alone.
    pub unique_mixing_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_shared: 8,
            n_unique_h: 8,
            n_unique_p: 8,
            obs_dim_h: 32,
            obs_dim_p: 32,
            seed: 7,
            noise_std: 0.05,
            n_samples: 4096,
            n_classes: 4,
            unique_mixing_scale: 1.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.n_shared,
            self.n_unique_h,
            self.n_unique_p,
            self.obs_dim_h,
            self.obs_dim_p,
            self.n_samples,
            self.n_classes,
        ];
        if counts.contains(&0) {
            return Err(Error::invalid("synthetic counts must all be >= 1"));
        }
        if !(self.noise_std >= 0.0) || !self.unique_mixing_scale.is_finite() {
            return Err(Error::invalid("noise_std must be >= 0 and the mixing scale finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderSpec {
    /// Hidden widths of the encoder; the last one is the representation handed to probes.
    pub encoder_widths: Vec<usize>,
    /// Widths of the three projector layers; the last one is the embedding dimension K.
    pub projector_widths: [usize; 3],
    pub activation: Activation,
    pub init_seed: u64,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self {
            encoder_widths: vec![64, 32],
            projector_widths: [64, 64, 64],
            activation: Activation::Tanh,
            init_seed: 1,
        }
    }
}

impl EncoderSpec {
    pub fn output_dim(&self) -> usize {
        self.projector_widths[2]
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) || self.projector_widths.contains(&0) {
            return Err(Error::invalid("encoder and projector widths must be nonempty and >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// Leading fraction of the samples used for pretraining and probe fitting; the rest is
    /// the probe test split.
    pub train_fraction: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { train_fraction: 0.8, iterations: 400, learning_rate: 0.05, l2: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// 0 disables momentum.
    pub momentum: f64,
    pub loss: LossOptions,
    pub partition: PartitionConfig,
    pub augment: AugmentParams,
    pub seed: u64,
    /// Decoupling metrics are logged every this many steps (and at the last step); 0 logs
    /// them only at the end.
    pub eval_every: usize,
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            steps: 1000,
            learning_rate: 1e-3,
            momentum: 0.9,
            loss: LossOptions::default(),
            partition: PartitionConfig { k_total: 64, k_common: 48, k_unique: 16 },
            augment: AugmentParams::default(),
            seed: 0,
            eval_every: 100,
            eval_samples: 512,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch size must be >= 2"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("learning rate must be > 0 and momentum in [0, 1)"));
        }
        self.partition.validate()?;
        self.loss.weights.validate()?;
        self.augment.validate()
    }
}

/// Everything a training run needs; the JSON config file format.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub synthetic: SyntheticConfig,
    pub encoder_h: EncoderSpec,
    pub encoder_p: EncoderSpec,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.encoder_h.validate()?;
        self.encoder_p.validate()?;
        self.train.validate()?;
        let k = self.train.partition.k_total;
        if self.encoder_h.output_dim() != k || self.encoder_p.output_dim() != k {
            return Err(Error::invalid(format!(
                "projector output dims ({}, {}) must equal partition k_total {k}",
                self.encoder_h.output_dim(),
                self.encoder_p.output_dim()
            )));
        }
        if !(self.probe.train_fraction > 0.0 && self.probe.train_fraction < 1.0) {
            return Err(Error::invalid("probe train_fraction must be in (0, 1)"));
        }
        Ok(())
    }
}
