use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use polarhe::trainer::{run_ablation, ExperimentConfig, LossVariant, DEFAULT_RATIOS};
use serde::{Deserialize, Serialize};

use crate::manifest::{load_config, ManifestWriter};
use crate::train::seeds;
use crate::Common;

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated seed offsets; overrides the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

fn default_variants() -> Vec<LossVariant> {
    LossVariant::ALL.to_vec()
}

fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    #[serde(default = "default_variants")]
    pub variants: Vec<LossVariant>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    /// Offsets added to the training and initialization seeds, one run per offset.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

pub fn run(args: AblateArgs) -> Result<()> {
    let mut cfg = match &args.common.config {
        Some(path) => load_config::<AblationConfig>(path, "ablate")?.0,
        None => AblationConfig {
            experiment: ExperimentConfig::default(),
            variants: default_variants(),
            ratios: default_ratios(),
            seeds: default_seeds(),
        },
    };
    if let Some(seed) = args.common.seed {
        cfg.experiment.train.seed = seed;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    cfg.experiment.validate()?;
    let out = &args.common.out;
    let mut manifest = ManifestWriter::start(out, "ablate", &cfg, Vec::new(), seeds(&cfg.experiment))?;
    let report = run_ablation(&cfg.experiment, &cfg.variants, &cfg.ratios, &cfg.seeds)?;

    let files: [(&str, String); 3] = [
        ("ablation_cells.csv", report.cells_csv()),
        ("ablation_summary.csv", report.summary_csv()),
        ("ablation_table.txt", report.to_table()),
    ];
    for (name, text) in files {
        let path: PathBuf = out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        manifest.output(path);
    }
    manifest.finish()?;
    print!("{}", report.to_table());
    Ok(())
}
