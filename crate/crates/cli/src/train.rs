use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use polarhe::decoupling::{write_embeddings, EmbeddingBatch, Modality, View};
use polarhe::trainer::{
    build_branches, generate_synthetic, linear_probe, load_params, save_params, train, ExperimentConfig, TrainLog,
    TrainedEncoders,
};
use serde::{Deserialize, Serialize};

use crate::manifest::{load_config, resolve, ManifestWriter};
use crate::Common;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    /// Parameters saved by `train` (`params.pmm`); without it the probe runs on a freshly
    /// initialized encoder.
    #[arg(long)]
    params: Option<PathBuf>,
}

pub(crate) fn experiment_config(common: &Common, command: &str) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config::<ExperimentConfig>(path, command)?.0,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn seeds(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    BTreeMap::from([
        ("synthetic".to_string(), cfg.synthetic.seed),
        ("train".to_string(), cfg.train.seed),
        ("init_h".to_string(), cfg.encoder_h.init_seed),
        ("init_p".to_string(), cfg.encoder_p.init_seed),
        ("probe".to_string(), cfg.probe.seed),
    ])
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    steps: usize,
    final_l_total: f64,
    probe_accuracy: Option<f64>,
    final_metrics: &'a Option<polarhe::decoupling::DecouplingMetrics>,
}

fn write_text(manifest: &mut ManifestWriter, path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    manifest.output(path);
    Ok(())
}

pub fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = experiment_config(&args.common, "train")?;
    let out = &args.common.out;
    let mut manifest = ManifestWriter::start(out, "train", &cfg, Vec::new(), seeds(&cfg))?;
    let data = generate_synthetic(&cfg.synthetic)?;
    let (enc, log) = train(&data, &cfg.encoder_h, &cfg.encoder_p, &cfg.train, &cfg.probe)?;

    write_text(&mut manifest, out.join("train_log.csv"), &log.to_csv())?;
    write_text(&mut manifest, out.join("step_seconds.json"), &(serde_json::to_string(&log.step_seconds)? + "\n"))?;
    let params = out.join("params.pmm");
    save_params(&params, &enc)?;
    manifest.output(params);
    write_eval_embeddings(&mut manifest, out, &cfg, &data, &enc)?;
    let summary = summarize(&cfg, &log);
    write_text(&mut manifest, out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    manifest.finish()?;
    println!(
        "trained {} steps: l_total {:.4}, probe accuracy {:.4}",
        cfg.train.steps,
        summary.final_l_total,
        summary.probe_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn summarize<'a>(cfg: &ExperimentConfig, log: &'a TrainLog) -> TrainSummary<'a> {
    TrainSummary {
        steps: cfg.train.steps,
        final_l_total: log.records.last().map_or(f64::NAN, |r| r.l_total),
        probe_accuracy: log.probe_accuracy,
        final_metrics: &log.final_metrics,
    }
}

/// Held-out embeddings of both branches, for `metrics`.
fn write_eval_embeddings(
    manifest: &mut ManifestWriter,
    out: &Path,
    cfg: &ExperimentConfig,
    data: &polarhe::trainer::PairedDataset,
    enc: &TrainedEncoders,
) -> Result<()> {
    let (_, held_out) = data.split(cfg.probe.train_fraction);
    let n = cfg.train.eval_samples.clamp(2, held_out.len());
    let eval = held_out.slice(0, n);
    for (name, branch, x, modality) in [("embeddings_h.pmm", &enc.h, &eval.h, Modality::H), ("embeddings_p.pmm", &enc.p, &eval.p, Modality::P)] {
        let path = out.join(name);
        let batch = EmbeddingBatch::new(branch.embed(x), modality, View::One)?;
        write_embeddings(&path, &batch, &cfg.train.partition)?;
        manifest.output(path);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub params: Option<PathBuf>,
}

pub fn run_probe(args: ProbeArgs) -> Result<()> {
    let cwd = std::env::current_dir()?;
    let (mut cfg, base) = match &args.common.config {
        Some(path) => load_config::<ProbeConfig>(path, "probe")?,
        None => (ProbeConfig { experiment: ExperimentConfig::default(), params: None }, cwd.clone()),
    };
    cfg.params = match (&args.params, &cfg.params) {
        (Some(p), _) => Some(resolve(&cwd, p)?),
        (None, Some(p)) => Some(resolve(&base, p)?),
        (None, None) => None,
    };
    if let Some(seed) = args.common.seed {
        cfg.experiment.probe.seed = seed;
    }
    cfg.experiment.validate()?;
    let out = &args.common.out;
    let mut manifest = ManifestWriter::start(out, "probe", &cfg, cfg.params.iter().cloned().collect(), seeds(&cfg.experiment))?;

    let exp = &cfg.experiment;
    let data = generate_synthetic(&exp.synthetic)?;
    let enc = match &cfg.params {
        Some(p) => load_params(p).with_context(|| format!("loading {}", p.display()))?,
        None => build_branches(data.h.ncols(), data.p.ncols(), &exp.encoder_h, &exp.encoder_p),
    };
    let (train_split, test_split) = data.split(exp.probe.train_fraction);
    let accuracy = linear_probe(&enc.h.encoder, &train_split, &test_split, &exp.probe)?;
    let result = serde_json::json!({
        "accuracy": accuracy,
        "chance": 1.0 / exp.synthetic.n_classes as f64,
        "train_samples": train_split.len(),
        "test_samples": test_split.len(),
    });
    write_text(&mut manifest, out.join("probe.json"), &(serde_json::to_string_pretty(&result)? + "\n"))?;
    manifest.finish()?;
    println!("probe accuracy {accuracy:.4}");
    Ok(())
}
