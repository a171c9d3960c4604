//! Datasets, candidate feature tables, the metered feature oracle, and
//! data sources (synthetic generator, multi-view CSV loader).

mod multiview;
mod oracle;
mod synthetic;

pub use multiview::{load_multiview_csv, CsvDataConfig, MultiViewData, ViewSpec};
pub use oracle::{AuditRecord, FeatureOracle};
pub use synthetic::{generate_synthetic, SyntheticBundle, SyntheticConfig};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rejection::{Label, Outcome};

fn check_unique_ids(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate sample id '{id}'")));
        }
    }
    Ok(())
}

fn check_rect(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let dim = rows[0].len();
    if dim == 0 {
        return Err(Error::InvalidInput(format!("{what} rows have zero width")));
    }
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{what} rows contain non-finite values"
            )));
        }
    }
    Ok(dim)
}

/// Labeled training rows over the observed (always available) features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    sample_ids: Vec<String>,
    observed: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl TrainingSet {
    pub fn new(sample_ids: Vec<String>, observed: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        if sample_ids.len() != observed.len() || labels.len() != observed.len() {
            return Err(Error::InvalidInput(format!(
                "training set sizes disagree: {} ids, {} rows, {} labels",
                sample_ids.len(),
                observed.len(),
                labels.len()
            )));
        }
        check_unique_ids(&sample_ids)?;
        check_rect(&observed, "training")?;
        Ok(Self {
            sample_ids,
            observed,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty sets
    }

    pub fn dim(&self) -> usize {
        self.observed[0].len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn observed(&self) -> &[Vec<f64>] {
        &self.observed
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

/// Candidate feature values for a set of samples: `K` named feature
/// blocks, each a fixed-width group of columns, stored per sample.
///
/// The table itself is unmetered; budgeted access goes through
/// [`FeatureOracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    feature_names: Vec<String>,
    column_labels: Vec<Vec<String>>,
    values: Vec<Vec<Vec<f64>>>,
}

impl CandidateTable {
    /// `values[sample][feature]` is that feature's block for the sample;
    /// block widths must match `column_labels[feature].len()`.
    pub fn new(
        feature_names: Vec<String>,
        column_labels: Vec<Vec<String>>,
        values: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::InvalidInput("candidate table has no features".into()));
        }
        if column_labels.len() != feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature names but {} column label groups",
                feature_names.len(),
                column_labels.len()
            )));
        }
        check_unique_ids(&feature_names)?;
        for (k, cols) in column_labels.iter().enumerate() {
            if cols.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "feature '{}' has no columns",
                    feature_names[k]
                )));
            }
        }
        if values.is_empty() {
            return Err(Error::InvalidInput("candidate table has no samples".into()));
        }
        for (s, per_feature) in values.iter().enumerate() {
            if per_feature.len() != feature_names.len() {
                return Err(Error::InvalidInput(format!(
                    "sample {s} has {} feature blocks, expected {}",
                    per_feature.len(),
                    feature_names.len()
                )));
            }
            for (k, block) in per_feature.iter().enumerate() {
                if block.len() != column_labels[k].len() {
                    return Err(Error::DimensionMismatch {
                        expected: column_labels[k].len(),
                        actual: block.len(),
                    });
                }
                if !block.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "sample {s}, feature '{}': non-finite value",
                        feature_names[k]
                    )));
                }
            }
        }
        Ok(Self {
            feature_names,
            column_labels,
            values,
        })
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_samples(&self) -> usize {
        self.values.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_name(&self, feature: usize) -> &str {
        &self.feature_names[feature]
    }

    pub fn column_labels(&self, feature: usize) -> &[String] {
        &self.column_labels[feature]
    }

    pub fn width(&self, feature: usize) -> usize {
        self.column_labels[feature].len()
    }

    pub fn value(&self, sample: usize, feature: usize) -> &[f64] {
        &self.values[sample][feature]
    }
}

/// Held-out evaluation rows. Candidate blocks are bundled in because test
/// time access is free; the budget only meters training-time acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    sample_ids: Vec<String>,
    observed: Vec<Vec<f64>>,
    candidates: CandidateTable,
    truth: Vec<Outcome>,
}

impl TestSet {
    pub fn new(
        sample_ids: Vec<String>,
        observed: Vec<Vec<f64>>,
        candidates: CandidateTable,
        truth: Vec<Outcome>,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::InvalidInput("test set is empty".into()));
        }
        if sample_ids.len() != observed.len()
            || truth.len() != observed.len()
            || candidates.num_samples() != observed.len()
        {
            return Err(Error::InvalidInput(format!(
                "test set sizes disagree: {} ids, {} rows, {} truths, {} candidate rows",
                sample_ids.len(),
                observed.len(),
                truth.len(),
                candidates.num_samples()
            )));
        }
        check_unique_ids(&sample_ids)?;
        check_rect(&observed, "test")?;
        Ok(Self {
            sample_ids,
            observed,
            candidates,
            truth,
        })
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.observed[0].len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn observed(&self) -> &[Vec<f64>] {
        &self.observed
    }

    pub fn candidates(&self) -> &CandidateTable {
        &self.candidates
    }

    pub fn truth(&self) -> &[Outcome] {
        &self.truth
    }

    /// Observed row extended with one candidate feature block.
    pub fn augmented_row(&self, sample: usize, feature: usize) -> Vec<f64> {
        let mut row = self.observed[sample].clone();
        row.extend_from_slice(self.candidates.value(sample, feature));
        row
    }
}
