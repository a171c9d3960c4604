//! `run`: execute an experiment, write report files and exemplar models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use exml::acquisition::AllocationStrategy;
use exml::harness::{run_experiment, write_report_files, ExperimentConfig};

use crate::{report::print_summary, runtime, CmdResult};

/// `models/meta.json`: how to bind CSV input to the saved models.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelsMeta {
    pub schema_version: u32,
    pub config_hash: String,
    /// Input column names of the initial model, in order.
    pub observed_columns: Vec<String>,
    pub cascades: Vec<CascadeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CascadeEntry {
    pub strategy: AllocationStrategy,
    pub file: String,
}

pub const MODELS_META_VERSION: u32 = 1;

pub fn cmd_run(config: &ExperimentConfig, out: &Path) -> CmdResult {
    // Err means zero repetitions succeeded; partial failures are
    // reported in the report's warnings instead.
    let output = run_experiment(config).map_err(runtime)?;
    write_report_files(&output.report, out).map_err(runtime)?;

    if let Some(exemplar) = &output.exemplar {
        let dir = out.join("models");
        std::fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
        write(&dir, "initial.json", exemplar.initial.to_json().map_err(runtime)?)?;
        let mut entries = Vec::new();
        for (strategy, cascade) in &exemplar.cascades {
            let file = format!("cascade_{strategy}.json");
            write(&dir, &file, cascade.to_json().map_err(runtime)?)?;
            entries.push(CascadeEntry {
                strategy: *strategy,
                file,
            });
        }
        let meta = ModelsMeta {
            schema_version: MODELS_META_VERSION,
            config_hash: output.report.config_hash.clone(),
            observed_columns: exemplar.observed_columns.clone(),
            cascades: entries,
        };
        write(
            &dir,
            "meta.json",
            serde_json::to_string_pretty(&meta).map_err(runtime)?,
        )?;
    }

    print_summary(&output.report);
    println!("report written to {}", out.display());
    Ok(())
}

fn write(dir: &Path, name: &str, contents: String) -> CmdResult {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}
