//! `predict`: batch cascade prediction over a CSV of samples.

use std::path::Path;

use exml::cascade::{cascade_predict, write_batch_csv, CascadeModel, CascadePrediction, Layer};
use exml::acquisition::AllocationStrategy;
use exml::rejection::{predict, Decision, Outcome};
use exml::Error;

use crate::run::ModelsMeta;
use crate::{runtime, CmdResult, Failure};

/// Loads one cascade from `models`, scores every row of `input`, and
/// writes `predictions.csv` under `out`.
///
/// Layer 2 needs the selected feature's columns; without `augment_all`
/// they are only required when some row is actually rejected by the
/// initial model. With `augment_all` every row is scored by the
/// augmented model, so the columns are required up front.
pub fn cmd_predict(
    models: &Path,
    input: &Path,
    out: &Path,
    strategy: Option<AllocationStrategy>,
    augment_all: bool,
) -> CmdResult {
    let meta = load_meta(models)?;
    let cascade = load_cascade(models, &meta, strategy)?;

    let mut reader = csv::Reader::from_path(input)
        .map_err(|e| Failure::Usage(format!("cannot read input {}: {e}", input.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| runtime(format!("{}: {e}", input.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        records.push(rec.map_err(|e| {
            runtime(format!("{} row {}: {e}", input.display(), i + 1))
        })?);
    }

    std::fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let out_path = out.join("predictions.csv");

    // Header-only (or empty) input: emit the output header and succeed
    // without demanding any particular input columns.
    if records.is_empty() {
        let file = std::fs::File::create(&out_path)
            .map_err(|e| runtime(format!("{}: {e}", out_path.display())))?;
        write_batch_csv(&[], file).map_err(runtime)?;
        println!("wrote 0 predictions to {}", out_path.display());
        return Ok(());
    }

    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_idx = column("sample_id");
    let mut observed_idx = Vec::with_capacity(meta.observed_columns.len());
    for name in &meta.observed_columns {
        observed_idx.push(column(name).ok_or_else(|| {
            runtime(format!(
                "input {} is missing observed column '{name}'",
                input.display()
            ))
        })?);
    }
    let feature_idx: Result<Vec<usize>, &String> = cascade
        .feature_columns()
        .iter()
        .map(|name| column(name).ok_or(name))
        .collect();
    if augment_all {
        if let Err(name) = &feature_idx {
            return Err(runtime(format!(
                "input {} is missing feature column '{name}', required by --augment-all",
                input.display()
            )));
        }
    }

    let mut results: Vec<(String, CascadePrediction)> = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let id = match id_idx {
            Some(i) => rec.get(i).unwrap_or("").to_string(),
            None => row.to_string(),
        };
        let observed = parse_columns(rec, &observed_idx, &headers, &id).map_err(runtime)?;
        let prediction = if augment_all {
            let idx = feature_idx.as_ref().expect("checked above");
            let block = parse_columns(rec, idx, &headers, &id).map_err(runtime)?;
            augmented_only(&cascade, &observed, block)
                .map_err(|e| runtime(format!("sample '{id}': {e}")))?
        } else {
            cascade_predict(&cascade, &observed, || match &feature_idx {
                Ok(idx) => parse_columns(rec, idx, &headers, &id).map_err(Error::InvalidInput),
                Err(name) => Err(Error::InvalidInput(format!(
                    "input lacks feature column '{name}', needed once a sample is rejected"
                ))),
            })
            .map_err(|e| runtime(format!("sample '{id}': {e}")))?
        };
        results.push((id, prediction));
    }

    let file = std::fs::File::create(&out_path)
        .map_err(|e| runtime(format!("{}: {e}", out_path.display())))?;
    write_batch_csv(&results, file).map_err(runtime)?;
    println!("wrote {} predictions to {}", results.len(), out_path.display());
    Ok(())
}

fn load_meta(models: &Path) -> Result<ModelsMeta, Failure> {
    let path = models.join("meta.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Failure::Usage(format!(
            "{} is not a model directory ({}: {e})",
            models.display(),
            path.display()
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_cascade(
    models: &Path,
    meta: &ModelsMeta,
    strategy: Option<AllocationStrategy>,
) -> Result<CascadeModel, Failure> {
    let entry = match strategy {
        Some(wanted) => meta
            .cascades
            .iter()
            .find(|c| c.strategy == wanted)
            .ok_or_else(|| {
                Failure::Usage(format!(
                    "no cascade for strategy '{wanted}' in {} (available: {})",
                    models.display(),
                    available(meta)
                ))
            })?,
        None => match meta.cascades.as_slice() {
            [only] => only,
            [] => {
                return Err(Failure::Usage(format!(
                    "{} holds no cascade models; predict needs a run that included an ExML variant",
                    models.display()
                )))
            }
            _ => {
                return Err(Failure::Usage(format!(
                    "{} holds several cascades ({}); pick one with --strategy",
                    models.display(),
                    available(meta)
                )))
            }
        },
    };
    let path = models.join(&entry.file);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    CascadeModel::from_json(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn available(meta: &ModelsMeta) -> String {
    if meta.cascades.is_empty() {
        return "none".into();
    }
    meta.cascades
        .iter()
        .map(|c| c.strategy.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Pulls the named columns out of one record as finite floats.
fn parse_columns(
    rec: &csv::StringRecord,
    idx: &[usize],
    headers: &[String],
    id: &str,
) -> Result<Vec<f64>, String> {
    let mut values = Vec::with_capacity(idx.len());
    for &i in idx {
        let raw = rec.get(i).unwrap_or("");
        let v: f64 = raw.trim().parse().map_err(|_| {
            format!("sample '{id}': column '{}': invalid number '{raw}'", headers[i])
        })?;
        if !v.is_finite() {
            return Err(format!(
                "sample '{id}': column '{}': non-finite value",
                headers[i]
            ));
        }
        values.push(v);
    }
    Ok(values)
}

/// Scores with the augmented model unconditionally; the initial model's
/// values are still reported so the output schema matches the cascade.
fn augmented_only(
    cascade: &CascadeModel,
    observed: &[f64],
    block: Vec<f64>,
) -> exml::Result<CascadePrediction> {
    let initial = predict(cascade.initial(), observed)?;
    let mut row = observed.to_vec();
    row.extend_from_slice(&block);
    let augmented = predict(cascade.augmented(), &row)?;
    let outcome = match augmented.decision {
        Decision::Positive => Outcome::Positive,
        Decision::Negative => Outcome::Negative,
        Decision::Reject => Outcome::Unknown,
    };
    Ok(CascadePrediction {
        outcome,
        layer: Layer::Augmented,
        initial,
        augmented: Some(augmented),
    })
}
