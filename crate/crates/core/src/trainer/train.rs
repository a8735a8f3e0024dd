use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::augment;
use super::config::{EncoderSpec, ProbeConfig, TrainConfig};
use super::mlp::{Branch, Mlp, MlpGrads};
use super::probe::linear_probe;
use super::synthetic::PairedDataset;
use crate::decoupling::{
    decoupling_metrics, loss_total, DecouplingMetrics, EmbeddingBatch, LossOptions, LossReport, Modality,
    PartitionConfig, View,
};
use crate::error::{Error, Result};

// Offsets mixed into a branch's init seed so encoder and projector draw different weights.
const PROJECTOR_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;
const BATCH_STREAM: u64 = 0;
const AUGMENT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEncoders {
    pub h: Branch,
    pub p: Branch,
}

fn build_branch(input_dim: usize, spec: &EncoderSpec) -> Branch {
    let mut enc_widths = vec![input_dim];
    enc_widths.extend(&spec.encoder_widths);
    let rep = *enc_widths.last().expect("nonempty");
    let mut proj_widths = vec![rep];
    proj_widths.extend(spec.projector_widths);
    Branch {
        encoder: Mlp::new(&enc_widths, spec.activation, true, spec.init_seed),
        projector: Mlp::new(&proj_widths, spec.activation, false, spec.init_seed ^ PROJECTOR_SEED_OFFSET),
    }
}

/// Freshly initialized H&E and polarization branches.
pub fn build_branches(input_h: usize, input_p: usize, spec_h: &EncoderSpec, spec_p: &EncoderSpec) -> TrainedEncoders {
    TrainedEncoders { h: build_branch(input_h, spec_h), p: build_branch(input_p, spec_p) }
}

/// Gradients of one branch's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGrads {
    pub encoder: MlpGrads,
    pub projector: MlpGrads,
}

impl BranchGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder.flat();
        v.extend(self.projector.flat());
        v
    }
}

fn branch_backward(branch: &Branch, views: [&Array2<f64>; 2], grads: [&Array2<f64>; 2]) -> BranchGrads {
    let mut enc = branch.encoder.zero_grads();
    let mut proj = branch.projector.zero_grads();
    for (x, g) in views.into_iter().zip(grads) {
        let enc_cache = branch.encoder.forward_cached(x);
        let proj_cache = branch.projector.forward_cached(enc_cache.output());
        let (pg, g_rep) = branch.projector.backward(&proj_cache, g);
        let (eg, _) = branch.encoder.backward(&enc_cache, &g_rep);
        proj.add_assign(&pg);
        enc.add_assign(&eg);
    }
    BranchGrads { encoder: enc, projector: proj }
}

/// `l_total` on four views and its gradient with respect to both branches' parameters.
pub fn objective_with_param_grads(
    enc: &TrainedEncoders,
    views: [&Array2<f64>; 4],
    part: &PartitionConfig,
    opts: &LossOptions,
) -> Result<(LossReport, BranchGrads, BranchGrads)> {
    let [h1, h2, p1, p2] = views;
    let e = |x: &Array2<f64>, b: &Branch, m, v| EmbeddingBatch::new(b.embed(x), m, v);
    let fh1 = e(h1, &enc.h, Modality::H, View::One)?;
    let fh2 = e(h2, &enc.h, Modality::H, View::Two)?;
    let fp1 = e(p1, &enc.p, Modality::P, View::One)?;
    let fp2 = e(p2, &enc.p, Modality::P, View::Two)?;
    let report = loss_total(&fh1, &fh2, &fp1, &fp2, part, opts, true)?;
    let g = report.grads.as_ref().expect("requested gradients");
    let gh = branch_backward(&enc.h, [h1, h2], [&g.h1, &g.h2]);
    let gp = branch_backward(&enc.p, [p1, p2], [&g.p1, &g.p2]);
    Ok((report, gh, gp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub common_diag_mean: f64,
    pub common_offdiag_abs_mean: f64,
    pub unique_diag_abs_mean: f64,
    pub unique_offdiag_abs_mean: f64,
    pub min_std: f64,
}

impl From<&DecouplingMetrics> for MetricSummary {
    fn from(m: &DecouplingMetrics) -> Self {
        Self {
            common_diag_mean: m.common_diag_mean,
            common_offdiag_abs_mean: m.common_offdiag_abs_mean,
            unique_diag_abs_mean: m.unique_diag_abs_mean,
            unique_offdiag_abs_mean: m.unique_offdiag_abs_mean,
            min_std: m.min_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub l_com: f64,
    pub l_uni: f64,
    pub l_h: f64,
    pub l_p: f64,
    pub l_total: f64,
    pub metrics: Option<MetricSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    /// One row per step `0..=steps`; row `s` is evaluated before the `s`-th update.
    pub records: Vec<StepRecord>,
    pub probe_accuracy: Option<f64>,
    /// Final decoupling metrics on the held-out split.
    pub final_metrics: Option<DecouplingMetrics>,
    /// Wall-clock seconds per step. Not part of the deterministic trajectory.
    pub step_seconds: Vec<f64>,
}

impl PartialEq for TrainLog {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.probe_accuracy.map(f64::to_bits) == other.probe_accuracy.map(f64::to_bits)
            && self.final_metrics == other.final_metrics
    }
}

pub const TRAIN_LOG_HEADER: &str = "step,l_com,l_uni,l_h,l_p,l_total,common_diag,common_offdiag,unique_diag,unique_offdiag,min_std";

impl TrainLog {
    /// Deterministic CSV of the trajectory; metric columns are empty on unevaluated steps.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAIN_LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{},{},{},{},{}", r.step, r.l_com, r.l_uni, r.l_h, r.l_p, r.l_total);
            match &r.metrics {
                Some(m) => {
                    let _ = write!(
                        out,
                        ",{},{},{},{},{}",
                        m.common_diag_mean, m.common_offdiag_abs_mean, m.unique_diag_abs_mean, m.unique_offdiag_abs_mean, m.min_std
                    );
                }
                None => out.push_str(",,,,,"),
            }
            out.push('\n');
        }
        out
    }
}

/// Metrics of the two branches' embeddings on un-augmented observations.
pub fn evaluate_metrics(enc: &TrainedEncoders, data: &PairedDataset, part: &PartitionConfig) -> Result<DecouplingMetrics> {
    let fh = EmbeddingBatch::new(enc.h.embed(&data.h), Modality::H, View::One)?;
    let fp = EmbeddingBatch::new(enc.p.embed(&data.p), Modality::P, View::One)?;
    decoupling_metrics(&fh, &fp, part)
}

struct Momentum {
    velocity: Vec<f64>,
}

impl Momentum {
    fn new(n: usize) -> Self {
        Self { velocity: vec![0.0; n] }
    }

    fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads, lr: f64, mu: f64) {
        let mut params = mlp.params_flat();
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grads.flat()) {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
        mlp.set_params_flat(&params);
    }
}

fn rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Mini-batch gradient descent (with optional momentum) on the decoupled objective.
///
/// The leading `probe.train_fraction` of `dataset` is used for pretraining and probe
/// fitting; the rest is held out for decoupling metrics and probe accuracy.
pub fn train(
    dataset: &PairedDataset,
    spec_h: &EncoderSpec,
    spec_p: &EncoderSpec,
    cfg: &TrainConfig,
    probe: &ProbeConfig,
) -> Result<(TrainedEncoders, TrainLog)> {
    cfg.validate()?;
    spec_h.validate()?;
    spec_p.validate()?;
    if spec_h.output_dim() != cfg.partition.k_total || spec_p.output_dim() != cfg.partition.k_total {
        return Err(Error::invalid("projector output dimension must equal partition k_total"));
    }
    let (train_split, held_out) = dataset.split(probe.train_fraction);
    if cfg.batch_size > train_split.len() {
        return Err(Error::invalid("batch size exceeds the training split"));
    }
    let eval_set = held_out.slice(0, cfg.eval_samples.clamp(2, held_out.len().max(2)).min(held_out.len()));

    let mut enc = build_branches(dataset.h.ncols(), dataset.p.ncols(), spec_h, spec_p);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    batch_rng.set_stream(BATCH_STREAM);
    let mut aug_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    aug_rng.set_stream(AUGMENT_STREAM);

    let mut opt = [
        Momentum::new(enc.h.encoder.param_count()),
        Momentum::new(enc.h.projector.param_count()),
        Momentum::new(enc.p.encoder.param_count()),
        Momentum::new(enc.p.projector.param_count()),
    ];
    let mut records = Vec::with_capacity(cfg.steps + 1);
    let mut step_seconds = Vec::with_capacity(cfg.steps + 1);

    for step in 0..=cfg.steps {
        let started = Instant::now();
        let idx = index::sample(&mut batch_rng, train_split.len(), cfg.batch_size).into_vec();
        let h = rows(&train_split.h, &idx);
        let p = rows(&train_split.p, &idx);
        let h1 = augment(&h, &cfg.augment, &mut aug_rng);
        let h2 = augment(&h, &cfg.augment, &mut aug_rng);
        let p1 = augment(&p, &cfg.augment, &mut aug_rng);
        let p2 = augment(&p, &cfg.augment, &mut aug_rng);

        let (report, gh, gp) = match objective_with_param_grads(&enc, [&h1, &h2, &p1, &p2], &cfg.partition, &cfg.loss) {
            Ok(r) => r,
            Err(Error::InvalidArgument(detail)) => {
                let last = records.last().map(|r: &StepRecord| r.l_total);
                return Err(Error::NonFiniteLoss {
                    step,
                    detail: format!("{detail}; last finite l_total {last:?}"),
                });
            }
            Err(e) => return Err(e),
        };

        let evaluate = step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
        let metrics = if evaluate {
            Some(MetricSummary::from(&evaluate_metrics(&enc, &eval_set, &cfg.partition)?))
        } else {
            None
        };
        records.push(StepRecord {
            step,
            l_com: report.l_com,
            l_uni: report.l_uni,
            l_h: report.l_h,
            l_p: report.l_p,
            l_total: report.l_total,
            metrics,
        });

        if step < cfg.steps {
            let (lr, mu) = (cfg.learning_rate, cfg.momentum);
            opt[0].step(&mut enc.h.encoder, &gh.encoder, lr, mu);
            opt[1].step(&mut enc.h.projector, &gh.projector, lr, mu);
            opt[2].step(&mut enc.p.encoder, &gp.encoder, lr, mu);
            opt[3].step(&mut enc.p.projector, &gp.projector, lr, mu);
        }
        step_seconds.push(started.elapsed().as_secs_f64());
    }

    let final_metrics = evaluate_metrics(&enc, &eval_set, &cfg.partition)?;
    let probe_accuracy = linear_probe(&enc.h.encoder, &train_split, &held_out, probe)?;
    Ok((
        enc,
        TrainLog { records, probe_accuracy: Some(probe_accuracy), final_metrics: Some(final_metrics), step_seconds },
    ))
}
