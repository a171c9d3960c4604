//! Experiment reports: per-repetition results, aggregate summaries, and
//! the CSV emitters for the summary table and the budget-allocation plot
//! data. The JSON schema is versioned; accuracies are percentages.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AllocationReport, AllocationStrategy};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, VariantKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Cross-validation trace for one grid threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub theta: f64,
    /// Mean over folds of correct-accepted / accepted (0/0 counts as 1).
    pub accepted_accuracy: f64,
    /// Pooled fraction of held-out points the model rejected.
    pub rejection_rate: f64,
    /// Folds that accepted nothing and fell back to the 0/0 := 1 rule.
    pub degenerate_folds: usize,
}

/// Outcome of the initial-threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub points: Vec<CalibrationPoint>,
    pub selected_theta: f64,
    /// False when no grid value reached the target and the highest
    /// accepted-accuracy was taken instead.
    pub met_target: bool,
}

/// One pipeline's score in one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub variant: VariantKind,
    /// Acquisition strategy feeding this variant; absent for the baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<AllocationStrategy>,
    /// Three-way accuracy in percent; absent when the variant was skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Threshold the score was measured at (the calibrated initial theta
    /// for the baseline, the best grid theta otherwise).
    pub theta: f64,
    /// Accuracy at every grid theta for augmented models. The headline
    /// number picks the best entry, which is optimistic; the full sweep
    /// stays available here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_theta: Option<Vec<ThetaAccuracy>>,
    /// Set when acquisition selected nothing and the variant was skipped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaAccuracy {
    pub theta: f64,
    pub accuracy: f64,
}

/// Everything one repetition produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub index: usize,
    pub seed: u64,
    /// Present unless the repetition failed before calibration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_initial: Option<f64>,
    /// Feature ids best-first under this repetition's data.
    pub true_ranking: Vec<usize>,
    pub variants: Vec<VariantResult>,
    pub allocations: Vec<AllocationReport>,
    /// Failure description when the repetition aborted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean and sample standard deviation of a variant's accuracy over the
/// repetitions that produced a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: VariantKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<AllocationStrategy>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repetitions: usize,
}

/// Feature-selection quality of one strategy across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub strategy: AllocationStrategy,
    /// Fraction of scoring repetitions whose pick was in the true top 2.
    pub top2_recall: f64,
    /// Selected feature id per repetition, None when nothing was bought.
    pub selected: Vec<Option<usize>>,
    /// Mean spend per feature id over repetitions.
    pub mean_spend: Vec<f64>,
    /// Share of total spend that went to the top half of features by
    /// true quality, averaged over repetitions.
    pub top_half_spend_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
    pub repetitions: Vec<RepetitionReport>,
    pub summaries: Vec<VariantSummary>,
    pub selection: Vec<SelectionSummary>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(json)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported report schema version {} (expected {})",
                report.schema_version, REPORT_SCHEMA_VERSION
            )));
        }
        Ok(report)
    }

    pub fn summary_for(
        &self,
        variant: VariantKind,
        strategy: Option<AllocationStrategy>,
    ) -> Option<&VariantSummary> {
        self.summaries
            .iter()
            .find(|s| s.variant == variant && s.strategy == strategy)
    }

    pub fn selection_for(&self, strategy: AllocationStrategy) -> Option<&SelectionSummary> {
        self.selection.iter().find(|s| s.strategy == strategy)
    }
}

/// Sample mean. Empty input is the caller's bug; summaries are only built
/// from non-empty score lists.
pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for a single value.
pub(crate) fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn format_cell(summary: Option<&VariantSummary>) -> String {
    match summary {
        Some(s) => format!("{:.2}±{:.2}", s.mean_accuracy, s.std_accuracy),
        None => String::new(),
    }
}

fn format_recall(selection: Option<&SelectionSummary>) -> String {
    match selection {
        Some(s) => format!("{:.2}", s.top2_recall),
        None => String::new(),
    }
}

/// One-row summary table mirroring the usual benchmark layout: baseline,
/// augmented and cascade variants under each strategy, and top-2 recall.
pub fn write_summary_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "budget_ratio",
        "SL",
        "EXML_AUG^UA",
        "EXML_AUG^ME",
        "EXML_CSD^UA",
        "EXML_CSD^ME",
        "recall^UA",
        "recall^ME",
    ])
    .map_err(csv_error)?;
    let ua = AllocationStrategy::Uniform;
    let me = AllocationStrategy::MedianElimination;
    w.write_record([
        report.name.clone(),
        format!("{}", report.config.acquisition.budget_ratio),
        format_cell(report.summary_for(VariantKind::Sl, None)),
        format_cell(report.summary_for(VariantKind::ExmlAug, Some(ua))),
        format_cell(report.summary_for(VariantKind::ExmlAug, Some(me))),
        format_cell(report.summary_for(VariantKind::ExmlCsd, Some(ua))),
        format_cell(report.summary_for(VariantKind::ExmlCsd, Some(me))),
        format_recall(report.selection_for(ua)),
        format_recall(report.selection_for(me)),
    ])
    .map_err(csv_error)?;
    w.flush()?;
    Ok(())
}

/// Per-feature spend averaged over repetitions; bar-chart input with one
/// row per (strategy, feature).
pub fn write_allocation_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "feature_id", "mean_spend", "spend_fraction"])
        .map_err(csv_error)?;
    for sel in &report.selection {
        let total: f64 = sel.mean_spend.iter().sum();
        for (id, &spend) in sel.mean_spend.iter().enumerate() {
            let fraction = if total > 0.0 { spend / total } else { 0.0 };
            w.write_record([
                sel.strategy.to_string(),
                id.to_string(),
                format!("{spend}"),
                format!("{fraction}"),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Episode-level risk trace for elimination runs; empty (header only)
/// when no episodic strategy ran.
pub fn write_episode_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "repetition",
        "strategy",
        "episode",
        "feature_id",
        "risk",
        "eliminated",
    ])
    .map_err(csv_error)?;
    for rep in &report.repetitions {
        for alloc in &rep.allocations {
            for ep in &alloc.episodes {
                for &feature in &ep.active {
                    let risk = ep.risks[feature]
                        .map(|r| format!("{r}"))
                        .unwrap_or_default();
                    w.write_record([
                        rep.index.to_string(),
                        alloc.strategy.to_string(),
                        ep.episode.to_string(),
                        feature.to_string(),
                        risk,
                        ep.eliminated.contains(&feature).to_string(),
                    ])
                    .map_err(csv_error)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_files(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    write_summary_csv(report, std::fs::File::create(dir.join("summary.csv"))?)?;
    write_allocation_csv(report, std::fs::File::create(dir.join("allocation.csv"))?)?;
    write_episode_csv(report, std::fs::File::create(dir.join("episode_risks.csv"))?)?;
    Ok(())
}

fn csv_error(err: csv::Error) -> Error {
    Error::Csv {
        path: "<report>".into(),
        row: None,
        message: err.to_string(),
    }
}
