use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::synthetic::generate_synthetic;
use super::train::train;
use crate::decoupling::PartitionConfig;
use crate::error::{Error, Result};

/// Common-block ratios swept by default.
pub const DEFAULT_RATIOS: [f64; 3] = [0.5, 0.75, 0.85];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    Full,
    NoIntra,
    NoDecoupling,
    NoBoth,
}

impl LossVariant {
    pub const ALL: [LossVariant; 4] = [LossVariant::Full, LossVariant::NoIntra, LossVariant::NoDecoupling, LossVariant::NoBoth];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Full => "full",
            LossVariant::NoIntra => "no_intra",
            LossVariant::NoDecoupling => "no_decoupling",
            LossVariant::NoBoth => "no_both",
        }
    }

    pub fn decouple(self) -> bool {
        matches!(self, LossVariant::Full | LossVariant::NoIntra)
    }

    pub fn intra(self) -> bool {
        matches!(self, LossVariant::Full | LossVariant::NoDecoupling)
    }

    /// Without decoupling every dimension is common, so the ratio has no effect.
    pub fn uses_ratio(self) -> bool {
        self.decouple()
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: LossVariant,
    /// `None` for variants that ignore the ratio.
    pub ratio: Option<f64>,
    pub k_common: usize,
    pub seed: u64,
    pub probe_accuracy: f64,
    pub final_l_total: f64,
    pub min_std: f64,
    pub common_diag_mean: f64,
    pub unique_diag_abs_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummaryRow {
    pub variant: LossVariant,
    pub ratio: Option<f64>,
    pub accuracies: Vec<f64>,
    pub median_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub summary: Vec<AblationSummaryRow>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ratio_label(ratio: Option<f64>) -> String {
    ratio.map_or_else(|| "-".to_string(), |r| format!("{:.0}%", r * 100.0))
}

impl AblationReport {
    /// Median probe accuracy of a summary row; ratio-free variants match any `ratio`.
    pub fn median_accuracy(&self, variant: LossVariant, ratio: Option<f64>) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.variant == variant && (!variant.uses_ratio() || r.ratio == ratio))
            .map(|r| r.median_accuracy)
    }

    pub fn cells_csv(&self) -> String {
        let mut out = String::from("variant,ratio,k_common,seed,probe_accuracy,final_l_total,min_std,common_diag_mean,unique_diag_abs_mean\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.variant,
                c.ratio.map_or(String::new(), |r| r.to_string()),
                c.k_common,
                c.seed,
                c.probe_accuracy,
                c.final_l_total,
                c.min_std,
                c.common_diag_mean,
                c.unique_diag_abs_mean
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("variant,ratio,median_accuracy,accuracies\n");
        for r in &self.summary {
            let accs: Vec<String> = r.accuracies.iter().map(f64::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.variant,
                r.ratio.map_or(String::new(), |x| x.to_string()),
                r.median_accuracy,
                accs.join(";")
            );
        }
        out
    }

    /// Aligned plain-text table of the summary rows.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .summary
            .iter()
            .map(|r| {
                let accs: Vec<String> = r.accuracies.iter().map(|a| format!("{:.2}", a * 100.0)).collect();
                [r.variant.to_string(), ratio_label(r.ratio), format!("{:.2}", r.median_accuracy * 100.0), accs.join(" ")]
            })
            .collect();
        let header = ["variant", "common", "median acc %", "per-seed acc %"];
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:>w1$}  {:>w2$}  {:<w3$}",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        line(&mut out, header);
        let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 6));
        for row in &rows {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3]]);
        }
        out
    }
}

struct CellSpec {
    variant: LossVariant,
    ratio: Option<f64>,
    seed: u64,
}

fn run_cell(base: &ExperimentConfig, spec: &CellSpec) -> Result<AblationCell> {
    let mut cfg = base.clone();
    let k = cfg.train.partition.k_total;
    cfg.train.partition = match spec.ratio {
        Some(r) => PartitionConfig::from_ratio(k, r)?,
        None => cfg.train.partition,
    };
    cfg.train.loss.decouple = spec.variant.decouple();
    cfg.train.loss.intra = spec.variant.intra();
    cfg.train.seed = base.train.seed.wrapping_add(spec.seed);
    cfg.encoder_h.init_seed = base.encoder_h.init_seed.wrapping_add(spec.seed);
    cfg.encoder_p.init_seed = base.encoder_p.init_seed.wrapping_add(spec.seed);
    cfg.validate()?;
    let data = generate_synthetic(&cfg.synthetic)?;
    let (_, log) = train(&data, &cfg.encoder_h, &cfg.encoder_p, &cfg.train, &cfg.probe)?;
    let last = log.records.last().expect("at least one record");
    let metrics = log.final_metrics.as_ref().expect("train reports final metrics");
    Ok(AblationCell {
        variant: spec.variant,
        ratio: spec.ratio,
        k_common: cfg.train.partition.k_common,
        seed: spec.seed,
        probe_accuracy: log.probe_accuracy.unwrap_or(f64::NAN),
        final_l_total: last.l_total,
        min_std: metrics.min_std,
        common_diag_mean: metrics.common_diag_mean,
        unique_diag_abs_mean: metrics.unique_diag_abs_mean,
    })
}

/// Trains every (variant, ratio, seed) cell and tabulates probe accuracy.
///
/// Seed offsets are added to the base training and initialization seeds; the synthetic
/// dataset is shared by all cells. Variants that ignore the ratio run once per seed.
pub fn run_ablation(base: &ExperimentConfig, variants: &[LossVariant], ratios: &[f64], seeds: &[u64]) -> Result<AblationReport> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("ablation needs at least one variant and one seed"));
    }
    if variants.iter().any(|v| v.uses_ratio()) && ratios.is_empty() {
        return Err(Error::invalid("decoupled variants need at least one ratio"));
    }
    let mut groups: Vec<(LossVariant, Option<f64>)> = Vec::new();
    for &v in variants {
        if v.uses_ratio() {
            groups.extend(ratios.iter().map(|&r| (v, Some(r))));
        } else {
            groups.push((v, None));
        }
    }
    groups.dedup();
    let specs: Vec<CellSpec> = groups
        .iter()
        .flat_map(|&(variant, ratio)| seeds.iter().map(move |&seed| CellSpec { variant, ratio, seed }))
        .collect();
    let cells = specs.par_iter().map(|s| run_cell(base, s)).collect::<Result<Vec<_>>>()?;
    let summary = groups
        .iter()
        .map(|&(variant, ratio)| {
            let accuracies: Vec<f64> = cells
                .iter()
                .filter(|c| c.variant == variant && c.ratio == ratio)
                .map(|c| c.probe_accuracy)
                .collect();
            AblationSummaryRow { variant, ratio, median_accuracy: median(&accuracies), accuracies }
        })
        .collect();
    Ok(AblationReport { cells, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn variant_flags() {
        assert!(LossVariant::Full.decouple() && LossVariant::Full.intra());
        assert!(LossVariant::NoIntra.decouple() && !LossVariant::NoIntra.intra());
        assert!(!LossVariant::NoDecoupling.decouple() && LossVariant::NoDecoupling.intra());
        assert!(!LossVariant::NoBoth.decouple() && !LossVariant::NoBoth.intra());
    }

    #[test]
    fn table_is_aligned() {
        let report = AblationReport {
            cells: vec![],
            summary: vec![
                AblationSummaryRow { variant: LossVariant::Full, ratio: Some(0.75), accuracies: vec![0.5, 0.6], median_accuracy: 0.55 },
                AblationSummaryRow { variant: LossVariant::NoBoth, ratio: None, accuracies: vec![0.4], median_accuracy: 0.4 },
            ],
        };
        let table = report.to_table();
        let lens: Vec<usize> = table.lines().filter(|l| !l.starts_with('-')).map(|l| l.trim_end().len()).collect();
        assert_eq!(lens.len(), 3);
        assert!(table.contains("75%"));
        assert_eq!(report.median_accuracy(LossVariant::NoBoth, Some(0.5)), Some(0.4));
        assert_eq!(report.median_accuracy(LossVariant::Full, Some(0.5)), None);
    }
}
