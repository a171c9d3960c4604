//! `synth`: materialize a synthetic dataset as CSV files plus a manifest.

use std::path::Path;

use exml::data::{generate_synthetic, CandidateTable, SyntheticConfig};
use exml::harness::{DataSpec, ExperimentConfig};
use exml::rejection::Label;

use crate::{runtime, usage, CmdResult, Failure};

/// Writes `train.csv`, `test.csv`, `candidates.csv`, and `meta.json`.
///
/// `test.csv` carries the candidate columns inline (test-time access is
/// free), so it can be fed straight to `predict`. `candidates.csv` is
/// the full oracle table over both splits, keyed by sample id.
pub fn cmd_synth(config: &ExperimentConfig, out: &Path) -> CmdResult {
    let DataSpec::Synthetic {
        a,
        n_per_class,
        angles_deg,
    } = &config.data
    else {
        return Err(Failure::Usage(
            "synth requires a config with data.kind = \"synthetic\"".into(),
        ));
    };
    let generator = SyntheticConfig {
        a: *a,
        n_per_class: *n_per_class,
        angles_deg: angles_deg.clone(),
        seed: config.seed,
    };
    let bundle = exml_err(generate_synthetic(&generator))?;
    std::fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;

    let dim = bundle.train.dim();
    let observed: Vec<String> = (0..dim).map(|i| format!("obs_{i}")).collect();
    let candidate_columns = flat_columns(&bundle.train_candidates);

    // train.csv: observed rows with perceived labels.
    let mut header: Vec<String> = vec!["sample_id".into()];
    header.extend(observed.iter().cloned());
    header.push("label".into());
    let mut w = writer(out, "train.csv")?;
    write_row(&mut w, out, &header)?;
    for (i, row) in bundle.train.observed().iter().enumerate() {
        let mut rec = vec![bundle.train.sample_ids()[i].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(label_str(bundle.train.labels()[i]).into());
        write_row(&mut w, out, &rec)?;
    }
    finish(w, out)?;

    // test.csv: observed + all candidate blocks + ground truth.
    let mut header: Vec<String> = vec!["sample_id".into()];
    header.extend(observed.iter().cloned());
    header.extend(candidate_columns.iter().cloned());
    header.push("truth".into());
    let mut w = writer(out, "test.csv")?;
    write_row(&mut w, out, &header)?;
    let test_candidates = bundle.test.candidates();
    for (i, row) in bundle.test.observed().iter().enumerate() {
        let mut rec = vec![bundle.test.sample_ids()[i].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        push_blocks(&mut rec, test_candidates, i);
        rec.push(bundle.test.truth()[i].as_str().into());
        write_row(&mut w, out, &rec)?;
    }
    finish(w, out)?;

    // candidates.csv: the oracle's table, train rows then test rows.
    let mut header: Vec<String> = vec!["sample_id".into()];
    header.extend(candidate_columns.iter().cloned());
    let mut w = writer(out, "candidates.csv")?;
    write_row(&mut w, out, &header)?;
    for (i, id) in bundle.train.sample_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        push_blocks(&mut rec, &bundle.train_candidates, i);
        write_row(&mut w, out, &rec)?;
    }
    for (i, id) in bundle.test.sample_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        push_blocks(&mut rec, test_candidates, i);
        write_row(&mut w, out, &rec)?;
    }
    finish(w, out)?;

    let meta = serde_json::json!({
        "schema_version": 1,
        "generator": {
            "a": generator.a,
            "n_per_class": generator.n_per_class,
            "angles_deg": generator.angles_deg,
            "seed": generator.seed,
        },
        "files": {
            "train": "train.csv",
            "test": "test.csv",
            "candidates": "candidates.csv",
        },
        "observed_columns": observed,
        "feature_names": bundle.train_candidates.feature_names(),
        "quality_ranking": bundle.quality_ranking,
        "rows": { "train": bundle.train.len(), "test": bundle.test.len() },
    });
    let path = out.join("meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta).map_err(runtime)?)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))?;

    println!(
        "wrote {} train rows, {} test rows, {} candidate features to {}",
        bundle.train.len(),
        bundle.test.len(),
        bundle.train_candidates.num_features(),
        out.display()
    );
    Ok(())
}

fn exml_err<T>(r: exml::Result<T>) -> Result<T, Failure> {
    r.map_err(usage)
}

fn label_str(label: Label) -> &'static str {
    match label {
        Label::Positive => "positive",
        Label::Negative => "negative",
    }
}

/// Candidate column names in feature order, blocks flattened.
fn flat_columns(table: &CandidateTable) -> Vec<String> {
    (0..table.num_features())
        .flat_map(|k| table.column_labels(k).iter().cloned())
        .collect()
}

fn push_blocks(rec: &mut Vec<String>, table: &CandidateTable, sample: usize) {
    for k in 0..table.num_features() {
        rec.extend(table.value(sample, k).iter().map(|v| v.to_string()));
    }
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>, Failure> {
    let path = dir.join(name);
    csv::Writer::from_path(&path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_row(
    w: &mut csv::Writer<std::fs::File>,
    dir: &Path,
    rec: &[String],
) -> CmdResult {
    w.write_record(rec)
        .map_err(|e| runtime(format!("writing under {}: {e}", dir.display())))
}

fn finish(w: csv::Writer<std::fs::File>, dir: &Path) -> CmdResult {
    w.into_inner()
        .map_err(|e| runtime(format!("writing under {}: {e}", dir.display())))?
        .sync_all()
        .ok();
    Ok(())
}
