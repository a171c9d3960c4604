//! Loader for multi-view CSV datasets.
//!
//! One file holds every view of every sample; a config names an id
//! column, a label column, the observed view, and one or more candidate
//! views (each a block of columns). The loader splits rows into train and
//! test, assigns random binary labels to train rows whose true class is
//! in `unknown_labels` (their class is by definition not learnable from
//! the data, matching the generator's unknown cluster), and optionally
//! z-scores every feature column on training statistics.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use super::{CandidateTable, TestSet, TrainingSet};
use crate::error::{Error, Result};
use crate::rejection::{Label, Outcome};

/// A named block of CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub name: String,
    pub columns: Vec<String>,
}

/// Where and how to read a multi-view CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvDataConfig {
    pub path: PathBuf,
    pub id_column: String,
    pub label_column: String,
    pub observed_view: ViewSpec,
    pub candidate_views: Vec<ViewSpec>,
    pub positive_labels: Vec<String>,
    pub negative_labels: Vec<String>,
    /// Classes that exist in the file but are not predictable from the
    /// features: their test rows score as `unknown`, their train rows get
    /// random binary labels.
    #[serde(default)]
    pub unknown_labels: Vec<String>,
    /// Classes dropped entirely before splitting.
    #[serde(default)]
    pub excluded_labels: Vec<String>,
    /// Fraction of kept rows that become training data, in (0, 1).
    pub train_fraction: f64,
    /// Z-score all feature columns using training-split statistics.
    #[serde(default = "default_standardize")]
    pub standardize: bool,
}

fn default_standardize() -> bool {
    true
}

/// Loaded and split dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewData {
    pub train: TrainingSet,
    pub train_candidates: CandidateTable,
    pub test: TestSet,
}

enum RowClass {
    Known(Label),
    Unknown,
}

impl CsvDataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.observed_view.columns.is_empty() {
            return Err(Error::Config("observed view has no columns".into()));
        }
        if self.candidate_views.is_empty() {
            return Err(Error::Config("no candidate views given".into()));
        }
        let mut names = HashSet::new();
        names.insert(self.observed_view.name.as_str());
        for v in &self.candidate_views {
            if v.columns.is_empty() {
                return Err(Error::Config(format!("candidate view '{}' has no columns", v.name)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::Config(format!("duplicate view name '{}'", v.name)));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let sets = [
            &self.positive_labels,
            &self.negative_labels,
            &self.unknown_labels,
            &self.excluded_labels,
        ];
        let mut seen: HashSet<&str> = HashSet::new();
        for set in sets {
            for l in set {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Config(format!(
                        "label '{l}' appears in more than one class list"
                    )));
                }
            }
        }
        if self.positive_labels.is_empty() || self.negative_labels.is_empty() {
            return Err(Error::Config(
                "positive_labels and negative_labels must both be non-empty".into(),
            ));
        }
        Ok(())
    }
}

struct RawRow {
    id: String,
    class: RowClass,
    observed: Vec<f64>,
    candidates: Vec<Vec<f64>>,
}

fn csv_err(path: &Path, row: Option<u64>, message: String) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        row,
        message,
    }
}

/// Mean and population standard deviation per column, fit on train rows
/// only; columns with zero spread are centered but not scaled.
fn standardize_columns(train: &mut [Vec<f64>], test: &mut [Vec<f64>]) {
    if train.is_empty() {
        return;
    }
    let dim = train[0].len();
    let m = train.len() as f64;
    for c in 0..dim {
        let mean = train.iter().map(|r| r[c]).sum::<f64>() / m;
        let var = train.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / m;
        let std = var.sqrt();
        let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
        for r in train.iter_mut() {
            r[c] = (r[c] - mean) * scale;
        }
        for r in test.iter_mut() {
            r[c] = (r[c] - mean) * scale;
        }
    }
}

/// Reads, splits, and (optionally) standardizes a multi-view CSV file.
/// `seed` drives the split shuffle and the random labels of unknown-class
/// training rows; identical inputs and seed give identical outputs.
pub fn load_multiview_csv(config: &CsvDataConfig, seed: u64) -> Result<MultiViewData> {
    config.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&config.path)
        .map_err(|e| csv_err(&config.path, None, e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_err(&config.path, None, e.to_string()))?
        .clone();
    let mut col_index: HashMap<&str, usize> = HashMap::new();
    for (i, name) in headers.iter().enumerate() {
        if col_index.insert(name, i).is_some() {
            return Err(csv_err(
                &config.path,
                None,
                format!("duplicate column '{name}' in header"),
            ));
        }
    }
    let find = |name: &str| -> Result<usize> {
        col_index
            .get(name)
            .copied()
            .ok_or_else(|| csv_err(&config.path, None, format!("missing column '{name}'")))
    };
    let id_idx = find(&config.id_column)?;
    let label_idx = find(&config.label_column)?;
    let observed_idx: Vec<usize> = config
        .observed_view
        .columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<_>>()?;
    let candidate_idx: Vec<Vec<usize>> = config
        .candidate_views
        .iter()
        .map(|v| v.columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let positive: HashSet<&str> = config.positive_labels.iter().map(|s| s.as_str()).collect();
    let negative: HashSet<&str> = config.negative_labels.iter().map(|s| s.as_str()).collect();
    let unknown: HashSet<&str> = config.unknown_labels.iter().map(|s| s.as_str()).collect();
    let excluded: HashSet<&str> = config.excluded_labels.iter().map(|s| s.as_str()).collect();

    let mut rows: Vec<RawRow> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i as u64 + 1;
        let record = record.map_err(|e| csv_err(&config.path, Some(row_no), e.to_string()))?;
        let get = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| {
                csv_err(&config.path, Some(row_no), format!("missing field {idx}"))
            })
        };
        let label_str = get(label_idx)?;
        if excluded.contains(label_str) {
            continue;
        }
        let class = if positive.contains(label_str) {
            RowClass::Known(Label::Positive)
        } else if negative.contains(label_str) {
            RowClass::Known(Label::Negative)
        } else if unknown.contains(label_str) {
            RowClass::Unknown
        } else {
            return Err(csv_err(
                &config.path,
                Some(row_no),
                format!("label '{label_str}' is not in any configured class list"),
            ));
        };
        let parse = |idx: usize, col: &str| -> Result<f64> {
            let raw = get(idx)?;
            raw.trim().parse::<f64>().map_err(|_| {
                csv_err(
                    &config.path,
                    Some(row_no),
                    format!("column '{col}': cannot parse '{raw}' as a number"),
                )
            })
        };
        let observed = observed_idx
            .iter()
            .zip(&config.observed_view.columns)
            .map(|(&idx, col)| parse(idx, col))
            .collect::<Result<Vec<_>>>()?;
        let candidates = candidate_idx
            .iter()
            .zip(&config.candidate_views)
            .map(|(idxs, view)| {
                idxs.iter()
                    .zip(&view.columns)
                    .map(|(&idx, col)| parse(idx, col))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawRow {
            id: get(id_idx)?.to_string(),
            class,
            observed,
            candidates,
        });
    }

    if rows.len() < 2 {
        return Err(csv_err(
            &config.path,
            None,
            format!("need at least 2 usable rows, found {}", rows.len()),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((rows.len() as f64) * config.train_fraction).floor() as usize;
    if n_train == 0 || n_train == rows.len() {
        return Err(Error::Config(format!(
            "train_fraction {} leaves an empty split for {} rows",
            config.train_fraction,
            rows.len()
        )));
    }
    let mut train_idx: Vec<usize> = order[..n_train].to_vec();
    let mut test_idx: Vec<usize> = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let mut train_ids = Vec::with_capacity(n_train);
    let mut train_obs = Vec::with_capacity(n_train);
    let mut train_labels = Vec::with_capacity(n_train);
    let mut train_cand = Vec::with_capacity(n_train);
    for &i in &train_idx {
        let row = &rows[i];
        train_ids.push(row.id.clone());
        train_obs.push(row.observed.clone());
        train_cand.push(row.candidates.clone());
        train_labels.push(match row.class {
            RowClass::Known(l) => l,
            // Unlearnable class: arbitrary binary label, as in the
            // synthetic generator.
            RowClass::Unknown => {
                if rng.random::<bool>() {
                    Label::Positive
                } else {
                    Label::Negative
                }
            }
        });
    }
    let mut test_ids = Vec::with_capacity(test_idx.len());
    let mut test_obs = Vec::with_capacity(test_idx.len());
    let mut test_truth = Vec::with_capacity(test_idx.len());
    let mut test_cand = Vec::with_capacity(test_idx.len());
    for &i in &test_idx {
        let row = &rows[i];
        test_ids.push(row.id.clone());
        test_obs.push(row.observed.clone());
        test_cand.push(row.candidates.clone());
        test_truth.push(match row.class {
            RowClass::Known(l) => Outcome::from(l),
            RowClass::Unknown => Outcome::Unknown,
        });
    }

    if config.standardize {
        standardize_columns(&mut train_obs, &mut test_obs);
        // Candidate blocks are standardized per view, concatenating
        // nothing: treat each view column independently.
        for k in 0..config.candidate_views.len() {
            let mut train_block: Vec<Vec<f64>> =
                train_cand.iter().map(|r| r[k].clone()).collect();
            let mut test_block: Vec<Vec<f64>> = test_cand.iter().map(|r| r[k].clone()).collect();
            standardize_columns(&mut train_block, &mut test_block);
            for (r, b) in train_cand.iter_mut().zip(train_block) {
                r[k] = b;
            }
            for (r, b) in test_cand.iter_mut().zip(test_block) {
                r[k] = b;
            }
        }
    }

    let names: Vec<String> = config.candidate_views.iter().map(|v| v.name.clone()).collect();
    let column_labels: Vec<Vec<String>> = config
        .candidate_views
        .iter()
        .map(|v| v.columns.clone())
        .collect();
    let train_candidates = CandidateTable::new(names.clone(), column_labels.clone(), train_cand)?;
    let test_candidates = CandidateTable::new(names, column_labels, test_cand)?;

    let train = TrainingSet::new(train_ids, train_obs, train_labels)?;
    let test = TestSet::new(test_ids, test_obs, test_candidates, test_truth)?;
    Ok(MultiViewData {
        train,
        train_candidates,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn base_config(path: PathBuf) -> CsvDataConfig {
        CsvDataConfig {
            path,
            id_column: "id".into(),
            label_column: "class".into(),
            observed_view: ViewSpec {
                name: "obs".into(),
                columns: vec!["o1".into(), "o2".into()],
            },
            candidate_views: vec![
                ViewSpec {
                    name: "viewA".into(),
                    columns: vec!["a1".into()],
                },
                ViewSpec {
                    name: "viewB".into(),
                    columns: vec!["b1".into(), "b2".into()],
                },
            ],
            positive_labels: vec!["yes".into()],
            negative_labels: vec!["no".into()],
            unknown_labels: vec!["other".into()],
            excluded_labels: vec!["skip".into()],
            train_fraction: 0.5,
            standardize: false,
        }
    }

    const SAMPLE: &str = "\
id,class,o1,o2,a1,b1,b2
r1,yes,1.0,2.0,3.0,4.0,5.0
r2,no,-1.0,0.5,1.5,2.5,3.5
r3,other,0.1,0.2,0.3,0.4,0.5
r4,yes,2.0,1.0,0.0,-1.0,-2.0
r5,no,-2.0,-1.0,1.0,2.0,3.0
r6,skip,9.0,9.0,9.0,9.0,9.0
r7,other,0.5,0.6,0.7,0.8,0.9
r8,no,-1.5,0.0,2.0,1.0,0.0
";

    #[test]
    fn loads_splits_and_classifies() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "d.csv", SAMPLE);
        let cfg = base_config(path);
        let data = load_multiview_csv(&cfg, 11).unwrap();
        // 8 rows minus 1 excluded = 7 usable; floor(7 * 0.5) = 3 train.
        assert_eq!(data.train.len(), 3);
        assert_eq!(data.test.len(), 4);
        assert_eq!(data.train.dim(), 2);
        assert_eq!(data.train_candidates.num_features(), 2);
        assert_eq!(data.train_candidates.width(1), 2);
        // The excluded row never shows up.
        for id in data.train.sample_ids().iter().chain(data.test.sample_ids()) {
            assert_ne!(id, "r6");
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "d.csv", SAMPLE);
        let cfg = base_config(path);
        let a = load_multiview_csv(&cfg, 5).unwrap();
        let b = load_multiview_csv(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = load_multiview_csv(&cfg, 6).unwrap();
        assert_ne!(
            (a.train.sample_ids(), a.train.labels()),
            (c.train.sample_ids(), c.train.labels())
        );
    }

    #[test]
    fn unmapped_label_reports_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let content = "id,class,o1,o2,a1,b1,b2\nr1,yes,1,2,3,4,5\nr2,mystery,1,2,3,4,5\n";
        let path = write_file(&dir, "d.csv", content);
        let cfg = base_config(path);
        match load_multiview_csv(&cfg, 0) {
            Err(Error::Csv { row, message, .. }) => {
                assert_eq!(row, Some(2));
                assert!(message.contains("mystery"));
            }
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let content = "id,class,o1,o2,a1,b1,b2\nr1,yes,1,2,3,4,5\nr2,no,1,oops,3,4,5\nr3,yes,0,0,0,0,0\nr4,no,1,1,1,1,1\n";
        let path = write_file(&dir, "d.csv", content);
        let cfg = base_config(path);
        match load_multiview_csv(&cfg, 0) {
            Err(Error::Csv { row, message, .. }) => {
                assert_eq!(row, Some(2));
                assert!(message.contains("o2") && message.contains("oops"), "{message}");
            }
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_a_header_error() {
        let dir = tempfile::tempdir().unwrap();
        let content = "id,class,o1,a1,b1,b2\nr1,yes,1,3,4,5\n";
        let path = write_file(&dir, "d.csv", content);
        let cfg = base_config(path);
        match load_multiview_csv(&cfg, 0) {
            Err(Error::Csv { row, message, .. }) => {
                assert_eq!(row, None);
                assert!(message.contains("o2"));
            }
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn standardization_uses_train_statistics_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "d.csv", SAMPLE);
        let mut cfg = base_config(path);
        cfg.standardize = true;
        let data = load_multiview_csv(&cfg, 11).unwrap();
        let m = data.train.len() as f64;
        for c in 0..2 {
            let mean: f64 = data.train.observed().iter().map(|r| r[c]).sum::<f64>() / m;
            let var: f64 = data
                .train
                .observed()
                .iter()
                .map(|r| (r[c] - mean).powi(2))
                .sum::<f64>()
                / m;
            assert!(mean.abs() < 1e-12, "train mean {mean} not centered");
            assert!((var - 1.0).abs() < 1e-9, "train variance {var} not unit");
        }
        // Test columns are transformed with the same parameters, so their
        // mean is generally nonzero.
        let test_mean: f64 =
            data.test.observed().iter().map(|r| r[0]).sum::<f64>() / data.test.len() as f64;
        assert!(test_mean.abs() > 1e-9);
    }

    #[test]
    fn constant_column_is_centered_not_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let content = "id,class,o1,o2,a1,b1,b2\n\
                       r1,yes,7.0,1.0,1,1,1\n\
                       r2,no,7.0,2.0,2,2,2\n\
                       r3,yes,7.0,3.0,3,3,3\n\
                       r4,no,7.0,4.0,4,4,4\n";
        let path = write_file(&dir, "d.csv", content);
        let mut cfg = base_config(path);
        cfg.standardize = true;
        let data = load_multiview_csv(&cfg, 2).unwrap();
        for r in data.train.observed().iter().chain(data.test.observed()) {
            assert_eq!(r[0], 0.0);
            assert!(r[0].is_finite());
        }
    }

    #[test]
    fn config_validation_rejects_overlapping_label_sets() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "d.csv", SAMPLE);
        let mut cfg = base_config(path);
        cfg.negative_labels.push("yes".into());
        assert!(matches!(load_multiview_csv(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_train_rows_get_random_binary_labels() {
        let dir = tempfile::tempdir().unwrap();
        // Enough unknown rows that both labels almost surely appear.
        let mut content = String::from("id,class,o1,o2,a1,b1,b2\n");
        for i in 0..40 {
            content.push_str(&format!("u{i},other,{i},1,2,3,4\n"));
        }
        let path = write_file(&dir, "d.csv", content.as_str());
        let mut cfg = base_config(path);
        cfg.train_fraction = 0.5;
        let data = load_multiview_csv(&cfg, 9).unwrap();
        let pos = data
            .train
            .labels()
            .iter()
            .filter(|&&l| l == Label::Positive)
            .count();
        assert!(pos > 0 && pos < data.train.len());
        // All unknown test rows score as unknown.
        assert!(data.test.truth().iter().all(|&o| o == Outcome::Unknown));
    }
}
