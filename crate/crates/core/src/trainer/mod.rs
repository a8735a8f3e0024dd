//! Toy dual-encoder training on synthetic paired modalities.
//!
//! A synthetic dataset with known shared and modality-unique latent factors stands in for
//! paired H&E / polarization patches. Two small MLP branches (encoder + three-layer
//! projector) are trained on the decoupled objective from [`crate::decoupling`], and the
//! frozen H&E encoder is evaluated by linear probing on labels that depend only on the
//! shared factors.

mod ablation;
mod augment;
mod config;
mod mlp;
mod params;
mod probe;
mod synthetic;
mod train;

pub use ablation::{run_ablation, AblationCell, AblationReport, AblationSummaryRow, LossVariant, DEFAULT_RATIOS};
pub use augment::{augment, AugmentParams};
pub use config::{EncoderSpec, ExperimentConfig, ProbeConfig, SyntheticConfig, TrainConfig};
pub use mlp::{Activation, Branch, Dense, Mlp, MlpGrads};
pub use params::{load_params, save_params, NetworkEntry, ParamManifest, TensorEntry};
pub use probe::{linear_probe, linear_probe_features};
pub use synthetic::{generate_synthetic, PairedDataset};
pub use train::{
    build_branches, evaluate_metrics, objective_with_param_grads, train, BranchGrads, MetricSummary, StepRecord, TrainLog,
    TrainedEncoders, TRAIN_LOG_HEADER,
};
