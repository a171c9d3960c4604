//! End-to-end tests of the `exml` binary: exit codes, file layouts, and
//! byte-level determinism of every subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use exml::cascade::{cascade_predict, write_batch_csv, CascadeModel};

const CONFIG: &str = r#"{
  "name": "cli-smoke",
  "data": {"kind": "synthetic", "a": 1.0, "n_per_class": 25, "angles_deg": [30.0, 90.0]},
  "training": {"c_h": 0.05, "c_g": 0.05},
  "acquisition": {"budget_ratio": 0.3},
  "evaluation": {"theta_grid": [0.2, 0.4], "calibration_folds": 3},
  "repetitions": 2,
  "seed": 99
}"#;

fn exml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exml"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One synth + run pair shared by the read-only tests.
struct Fixture {
    _dir: tempfile::TempDir,
    config: PathBuf,
    data: PathBuf,
    results: PathBuf,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("config.json");
        std::fs::write(&config, CONFIG).unwrap();
        let data = dir.path().join("data");
        let results = dir.path().join("results");
        let out = exml(&["synth", "--config", path(&config), "--out", path(&data)]);
        assert_eq!(code(&out), 0, "synth failed: {}", stderr(&out));
        let out = exml(&["run", "--config", path(&config), "--out", path(&results)]);
        assert_eq!(code(&out), 0, "run failed: {}", stderr(&out));
        Fixture {
            _dir: dir,
            config,
            data,
            results,
        }
    })
}

#[test]
fn help_exits_zero_and_bad_usage_exits_one() {
    assert_eq!(code(&exml(&["--help"])), 0);
    assert_eq!(code(&exml(&["run"])), 1, "missing --config/--out");
    assert_eq!(code(&exml(&["frobnicate"])), 1);
    assert_eq!(code(&exml(&["run", "--config", "x", "--out", "y", "--nope"])), 1);
}

#[test]
fn synth_writes_dataset_and_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = exml(&["synth", "--config", path(&config), "--out", path(out_dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in ["train.csv", "test.csv", "candidates.csv", "meta.json"] {
        let lhs = std::fs::read(a.join(name)).unwrap();
        let rhs = std::fs::read(b.join(name)).unwrap();
        assert!(!lhs.is_empty());
        assert_eq!(lhs, rhs, "{name} differs between identical invocations");
    }

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["rows"]["train"], 75);
    assert_eq!(meta["rows"]["test"], 75);
    assert_eq!(meta["observed_columns"], serde_json::json!(["obs_0", "obs_1"]));
    let train = std::fs::read_to_string(a.join("train.csv")).unwrap();
    assert_eq!(train.lines().count(), 76);
    assert_eq!(train.lines().next().unwrap(), "sample_id,obs_0,obs_1,label");
    let test = std::fs::read_to_string(a.join("test.csv")).unwrap();
    assert_eq!(
        test.lines().next().unwrap(),
        "sample_id,obs_0,obs_1,angle_30,angle_90,truth"
    );

    // A seed override must change the data.
    let c = dir.path().join("c");
    let out = exml(&[
        "synth", "--config", path(&config), "--out", path(&c), "--seed", "7",
    ]);
    assert_eq!(code(&out), 0);
    let lhs = std::fs::read(a.join("train.csv")).unwrap();
    let rhs = std::fs::read(c.join("train.csv")).unwrap();
    assert_ne!(lhs, rhs);
}

#[test]
fn synth_requires_synthetic_data_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, csv_config(&dir.path().join("missing.csv"))).unwrap();
    let out = exml(&["synth", "--config", path(&config), "--out", path(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("synthetic"), "{}", stderr(&out));
}

#[test]
fn run_writes_report_summary_and_models() {
    let f = fixture();
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(f.results.join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["name"], "cli-smoke");
    assert_eq!(report["repetitions"].as_array().unwrap().len(), 2);
    // SL plus two strategies for each of EXML_AUG and EXML_CSD.
    assert_eq!(report["summaries"].as_array().unwrap().len(), 5);
    assert_eq!(report["selection"].as_array().unwrap().len(), 2);

    let summary = std::fs::read_to_string(f.results.join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "dataset,budget_ratio,SL,EXML_AUG^UA,EXML_AUG^ME,EXML_CSD^UA,EXML_CSD^ME,recall^UA,recall^ME"
    ));
    assert!(f.results.join("allocation.csv").is_file());
    assert!(f.results.join("episode_risks.csv").is_file());

    let models = f.results.join("models");
    for name in [
        "initial.json",
        "cascade_uniform.json",
        "cascade_median_elimination.json",
        "meta.json",
    ] {
        assert!(models.join(name).is_file(), "missing models/{name}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(models.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["observed_columns"], serde_json::json!(["obs_0", "obs_1"]));
    assert_eq!(meta["config_hash"], report["config_hash"]);
}

#[test]
fn run_flags_override_config_scalars() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = exml(&[
        "run",
        "--config",
        path(&f.config),
        "--out",
        path(&out_dir),
        "--variants",
        "SL,EXML_CSD",
        "--strategy",
        "median",
        "--budget-ratio",
        "0.2",
        "--threads",
        "2",
        "--seed",
        "123",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("report.json")).unwrap(),
    )
    .unwrap();
    let config = &report["config"];
    assert_eq!(config["seed"], 123);
    assert_eq!(config["variants"], serde_json::json!(["SL", "EXML_CSD"]));
    assert_eq!(config["acquisition"]["budget_ratio"], 0.2);
    assert_eq!(
        config["acquisition"]["strategies"],
        serde_json::json!(["median_elimination"])
    );
    // SL + EXML_CSD under one strategy.
    assert_eq!(report["summaries"].as_array().unwrap().len(), 2);

    let models = out_dir.join("models");
    assert!(models.join("cascade_median_elimination.json").is_file());
    assert!(!models.join("cascade_uniform.json").exists());
}

#[test]
fn sl_only_run_saves_no_cascades() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = exml(&[
        "run",
        "--config",
        path(&f.config),
        "--out",
        path(&out_dir),
        "--variants",
        "SL",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["summaries"].as_array().unwrap().len(), 1);
    assert_eq!(report["summaries"][0]["variant"], "SL");

    let models = out_dir.join("models");
    assert!(models.join("initial.json").is_file());
    assert!(!models.join("cascade_uniform.json").exists());

    // Predict needs a cascade and must say so.
    let out = exml(&[
        "predict",
        path(&models),
        path(&f.data.join("test.csv")),
        "--out",
        path(&dir.path().join("preds")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no cascade"), "{}", stderr(&out));
}

#[test]
fn run_is_deterministic_across_invocations() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for name in ["r1", "r2"] {
        let out_dir = dir.path().join(name);
        let out = exml(&[
            "run",
            "--config",
            path(&f.config),
            "--out",
            path(&out_dir),
            "--variants",
            "EXML_CSD",
            "--strategy",
            "uniform",
            "--repetitions-ignored", // guard: flag does not exist
        ]);
        assert_eq!(code(&out), 1, "unknown flag must be rejected");
        let out = exml(&[
            "run",
            "--config",
            path(&f.config),
            "--out",
            path(&out_dir),
            "--variants",
            "EXML_CSD",
            "--strategy",
            "uniform",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let report: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out_dir.join("report.json")).unwrap(),
        )
        .unwrap();
        summaries.push(report["summaries"].clone());
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn run_exit_codes_separate_config_from_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");

    // Missing config file.
    let out = exml(&["run", "--config", path(&dir.path().join("nope.json")), "--out", path(&out_dir)]);
    assert_eq!(code(&out), 1);

    // Unknown key is named in the error.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, CONFIG.replace("\"seed\"", "\"sede\"")).unwrap();
    let out = exml(&["run", "--config", path(&bad), "--out", path(&out_dir)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sede"), "{}", stderr(&out));

    // Invalid variant list.
    let good = dir.path().join("good.json");
    std::fs::write(&good, CONFIG).unwrap();
    let out = exml(&[
        "run", "--config", path(&good), "--out", path(&out_dir), "--variants", "SL,BOGUS",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("BOGUS"), "{}", stderr(&out));

    // Well-formed config whose data file does not exist: a runtime failure.
    let missing_data = dir.path().join("csv.json");
    std::fs::write(&missing_data, csv_config(&dir.path().join("missing.csv"))).unwrap();
    let out = exml(&["run", "--config", path(&missing_data), "--out", path(&out_dir)]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn predict_round_trips_the_saved_models_exactly() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let models = f.results.join("models");
    let input = f.data.join("test.csv");
    let out = exml(&[
        "predict",
        path(&models),
        path(&input),
        "--out",
        path(&preds),
        "--strategy",
        "median_elimination", // long alias of `median`
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // Recompute every row in process and compare whole files.
    let cascade = CascadeModel::from_json(
        &std::fs::read_to_string(models.join("cascade_median_elimination.json")).unwrap(),
    )
    .unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(models.join("meta.json")).unwrap()).unwrap();
    let observed_columns: Vec<String> = meta["observed_columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();

    let mut reader = csv::Reader::from_path(&input).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let obs_idx: Vec<usize> = observed_columns.iter().map(|c| col(c)).collect();
    let feat_idx: Vec<usize> = cascade.feature_columns().iter().map(|c| col(c)).collect();
    let mut expected = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let id = rec.get(col("sample_id")).unwrap().to_string();
        let obs: Vec<f64> = obs_idx.iter().map(|&i| rec[i].parse().unwrap()).collect();
        let block: Vec<f64> = feat_idx.iter().map(|&i| rec[i].parse().unwrap()).collect();
        let p = cascade_predict(&cascade, &obs, || Ok(block.clone())).unwrap();
        expected.push((id, p));
    }
    let mut buf = Vec::new();
    write_batch_csv(&expected, &mut buf).unwrap();
    let produced = std::fs::read(preds.join("predictions.csv")).unwrap();
    assert_eq!(produced, buf, "CLI predictions differ from library predictions");

    // Both layers must appear on this data: some rows accepted at layer
    // 1, some pushed to the augmented model.
    let text = String::from_utf8(produced).unwrap();
    assert!(text.lines().skip(1).any(|l| l.contains(",initial,")));
    assert!(text.lines().skip(1).any(|l| l.contains(",augmented,")));

    // Identical invocations produce identical bytes.
    let preds2 = dir.path().join("preds2");
    let out = exml(&[
        "predict", path(&models), path(&input), "--out", path(&preds2), "--strategy", "median",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(preds.join("predictions.csv")).unwrap(),
        std::fs::read(preds2.join("predictions.csv")).unwrap()
    );
}

#[test]
fn predict_augment_all_scores_every_row_at_layer_two() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("preds");
    let out = exml(&[
        "predict",
        path(&f.results.join("models")),
        path(&f.data.join("test.csv")),
        "--out",
        path(&preds),
        "--strategy",
        "uniform",
        "--augment-all",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(preds.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 75);
    assert!(rows.iter().all(|l| l.contains(",augmented,")));
    // Layer-2 values are always present in this mode.
    assert!(rows.iter().all(|l| !l.ends_with(",,")));
}

#[test]
fn predict_empty_input_yields_header_only_output() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let models = f.results.join("models");

    let header_only = dir.path().join("empty.csv");
    std::fs::write(&header_only, "sample_id,unrelated\n").unwrap();
    let preds = dir.path().join("p1");
    let out = exml(&[
        "predict", path(&models), path(&header_only), "--out", path(&preds), "--strategy", "uniform",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        std::fs::read_to_string(preds.join("predictions.csv")).unwrap(),
        "sample_id,layer_decided,label,h1,g1,h2,g2\n"
    );

    let zero_byte = dir.path().join("zero.csv");
    std::fs::write(&zero_byte, "").unwrap();
    let preds = dir.path().join("p2");
    let out = exml(&[
        "predict", path(&models), path(&zero_byte), "--out", path(&preds), "--strategy", "uniform",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        std::fs::read_to_string(preds.join("predictions.csv")).unwrap(),
        "sample_id,layer_decided,label,h1,g1,h2,g2\n"
    );
}

#[test]
fn predict_missing_columns_fail_at_runtime() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let models = f.results.join("models");

    // Observed columns only; --augment-all needs the feature block.
    let observed_only = dir.path().join("observed_only.csv");
    std::fs::write(&observed_only, "sample_id,obs_0,obs_1\nx,0.1,0.2\n").unwrap();
    let out = exml(&[
        "predict",
        path(&models),
        path(&observed_only),
        "--out",
        path(&dir.path().join("p1")),
        "--strategy",
        "uniform",
        "--augment-all",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("feature column"), "{}", stderr(&out));

    // Missing observed column fails in either mode.
    let wrong = dir.path().join("wrong.csv");
    std::fs::write(&wrong, "sample_id,obs_0\nx,0.1\n").unwrap();
    let out = exml(&[
        "predict",
        path(&models),
        path(&wrong),
        "--out",
        path(&dir.path().join("p2")),
        "--strategy",
        "uniform",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("obs_1"), "{}", stderr(&out));

    // Unparseable number names the sample and column.
    let bad_value = dir.path().join("bad_value.csv");
    std::fs::write(
        &bad_value,
        "sample_id,obs_0,obs_1,angle_30,angle_90\nx,0.1,oops,0.3,0.4\n",
    )
    .unwrap();
    let out = exml(&[
        "predict",
        path(&models),
        path(&bad_value),
        "--out",
        path(&dir.path().join("p3")),
        "--strategy",
        "uniform",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("oops"), "{}", stderr(&out));

    // A directory that is not a model dir is a usage error.
    let out = exml(&[
        "predict",
        path(&dir.path().join("not_models")),
        path(&observed_only),
        "--out",
        path(&dir.path().join("p4")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn rank_writes_a_permutation_with_names() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("rank");
    let out = exml(&["rank", "--config", path(&f.config), "--out", path(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("ranking.json")).unwrap(),
    )
    .unwrap();
    let mut ranking: Vec<u64> = doc["ranking"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(ranking.len(), 2);
    ranking.sort_unstable();
    assert_eq!(ranking, vec![0, 1]);
    assert_eq!(doc["features"].as_array().unwrap().len(), 2);
    assert!(stdout(&out).contains("angle_"));
}

#[test]
fn report_summarizes_an_existing_run() {
    let f = fixture();
    // Directory form and explicit file form both work.
    for target in [f.results.clone(), f.results.join("report.json")] {
        let out = exml(&["report", path(&target)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("cli-smoke"));
        assert!(text.contains("EXML_CSD"));
        assert!(text.contains("top-2 recall"));
    }

    let out = exml(&["report", path(&f.data)]); // a dir without report.json
    assert_eq!(code(&out), 1);
}

fn csv_config(csv_path: &Path) -> String {
    format!(
        r#"{{
  "name": "csv-case",
  "data": {{
    "kind": "csv",
    "path": "{}",
    "id_column": "id",
    "label_column": "class",
    "observed_view": {{"name": "obs", "columns": ["a"]}},
    "candidate_views": [{{"name": "extra", "columns": ["b"]}}],
    "positive_labels": ["p"],
    "negative_labels": ["n"],
    "train_fraction": 0.5
  }},
  "repetitions": 1,
  "seed": 5
}}"#,
        csv_path.display()
    )
}
