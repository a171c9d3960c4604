//! Experiment configuration: dataset choice, budget, threshold grid,
//! strategies, variants, and repetition control. One JSON document drives
//! a whole experiment; its SHA-256 hash goes into the report so results
//! can be traced back to exact settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::AllocationStrategy;
use crate::data::{CsvDataConfig, SyntheticConfig};
use crate::error::{Error, Result};
use crate::rejection::{RejectionThreshold, TrainConfig};

/// Where a repetition's data comes from. Seeds are injected per
/// repetition by the runner, so neither variant carries one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Three Gaussian clusters with hidden-axis candidate slices.
    Synthetic {
        a: f64,
        n_per_class: usize,
        angles_deg: Vec<f64>,
    },
    /// Multi-view CSV file; one view observed, the rest candidates.
    /// Boxed: this variant is several times larger than the synthetic one.
    Csv(Box<CsvDataConfig>),
}

impl DataSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            DataSpec::Synthetic {
                a,
                n_per_class,
                angles_deg,
            } => {
                // Seed 0 is a placeholder; only the shape is validated here.
                let probe = SyntheticConfig {
                    a: *a,
                    n_per_class: *n_per_class,
                    angles_deg: angles_deg.clone(),
                    seed: 0,
                };
                probe.validate()
            }
            DataSpec::Csv(cfg) => cfg.validate(),
        }
    }

    /// Number of candidate features the spec will produce, when knowable
    /// without touching the file system.
    pub fn num_candidates(&self) -> usize {
        match self {
            DataSpec::Synthetic { angles_deg, .. } => angles_deg.len(),
            DataSpec::Csv(cfg) => cfg.candidate_views.len(),
        }
    }
}

/// Budgeted-acquisition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    /// Fraction b of the full table m*K a strategy may reveal.
    pub budget_ratio: f64,
    /// Strategies to run; each gets its own fresh budget.
    pub strategies: Vec<AllocationStrategy>,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        AcquisitionSection {
            budget_ratio: 0.2,
            strategies: vec![
                AllocationStrategy::Uniform,
                AllocationStrategy::MedianElimination,
            ],
        }
    }
}

impl AcquisitionSection {
    fn validate(&self) -> Result<()> {
        if !self.budget_ratio.is_finite() || !(0.0..=1.0).contains(&self.budget_ratio) {
            return Err(Error::Config(format!(
                "budget_ratio must lie in [0, 1], got {}",
                self.budget_ratio
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies must not be empty".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::Config(format!("duplicate strategy {s}")));
            }
        }
        Ok(())
    }
}

/// Threshold handling: the grid doubles as the calibration candidates for
/// the initial model and the selection pool for augmented models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub theta_grid: Vec<f64>,
    /// Accepted-accuracy level the initial threshold must reach in
    /// cross-validation.
    pub calibration_target: f64,
    pub calibration_folds: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            theta_grid: vec![0.1, 0.2, 0.3, 0.4],
            calibration_target: 0.95,
            calibration_folds: 5,
        }
    }
}

impl EvaluationSection {
    fn validate(&self) -> Result<()> {
        if self.theta_grid.is_empty() {
            return Err(Error::Config("theta_grid must not be empty".into()));
        }
        for (i, &t) in self.theta_grid.iter().enumerate() {
            RejectionThreshold::new(t)
                .map_err(|e| Error::Config(format!("theta_grid[{i}]: {e}")))?;
            if self.theta_grid[..i].contains(&t) {
                return Err(Error::Config(format!("duplicate theta {t} in grid")));
            }
        }
        if !self.calibration_target.is_finite()
            || self.calibration_target <= 0.0
            || self.calibration_target > 1.0
        {
            return Err(Error::Config(format!(
                "calibration_target must lie in (0, 1], got {}",
                self.calibration_target
            )));
        }
        if self.calibration_folds < 2 {
            return Err(Error::Config(format!(
                "calibration needs at least 2 folds, got {}",
                self.calibration_folds
            )));
        }
        Ok(())
    }

    pub(crate) fn thresholds(&self) -> Vec<RejectionThreshold> {
        // Validated construction happens in validate(); unwrap is safe on
        // a validated config.
        self.theta_grid
            .iter()
            .map(|&t| RejectionThreshold::new(t).unwrap())
            .collect()
    }
}

/// The measured pipelines. `Sl` is the rejection baseline on observed
/// features only; the ExML variants consume an acquisition strategy's
/// selected feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    #[serde(rename = "SL")]
    Sl,
    #[serde(rename = "EXML_AUG")]
    ExmlAug,
    #[serde(rename = "EXML_CSD")]
    ExmlCsd,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Sl => "SL",
            VariantKind::ExmlAug => "EXML_AUG",
            VariantKind::ExmlCsd => "EXML_CSD",
        }
    }
}

impl std::fmt::Display for VariantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_variants() -> Vec<VariantKind> {
    vec![VariantKind::Sl, VariantKind::ExmlAug, VariantKind::ExmlCsd]
}

fn default_repetitions() -> usize {
    10
}

/// Complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub data: DataSpec,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub acquisition: AcquisitionSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default = "default_variants")]
    pub variants: Vec<VariantKind>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("experiment name must not be empty".into()));
        }
        self.data.validate()?;
        self.training.validate()?;
        self.acquisition.validate()?;
        self.evaluation.validate()?;
        if self.variants.is_empty() {
            return Err(Error::Config("variants must not be empty".into()));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].contains(v) {
                return Err(Error::Config(format!("duplicate variant {v}")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical (compact, field-ordered) JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn wants(&self, variant: VariantKind) -> bool {
        self.variants.contains(&variant)
    }
}
