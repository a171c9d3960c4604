//! `report`: summarize a saved experiment report on stdout.

use std::path::Path;

use exml::harness::ExperimentReport;

use crate::{runtime, CmdResult, Failure};

pub fn cmd_report(path: &Path) -> CmdResult {
    let file = if path.is_dir() {
        path.join("report.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| Failure::Usage(format!("cannot read report {}: {e}", file.display())))?;
    let report = ExperimentReport::from_json(&text)
        .map_err(|e| runtime(format!("{}: {e}", file.display())))?;
    print_summary(&report);
    Ok(())
}

pub fn print_summary(report: &ExperimentReport) {
    let succeeded = report
        .repetitions
        .iter()
        .filter(|r| r.error.is_none())
        .count();
    println!("experiment: {}", report.name);
    println!("config hash: {}", report.config_hash);
    println!(
        "repetitions: {} of {} succeeded",
        succeeded,
        report.repetitions.len()
    );
    println!("wall time: {:.1} s", report.wall_time_seconds);

    if !report.summaries.is_empty() {
        println!();
        println!(
            "{:<10} {:<20} {:>16} {:>6}",
            "variant", "strategy", "accuracy", "reps"
        );
        for s in &report.summaries {
            let strategy = s
                .strategy
                .map(|st| st.to_string())
                .unwrap_or_else(|| "-".into());
            println!(
                "{:<10} {:<20} {:>8.2} ± {:>5.2} {:>6}",
                s.variant.as_str(),
                strategy,
                s.mean_accuracy,
                s.std_accuracy,
                s.repetitions
            );
        }
    }

    if !report.selection.is_empty() {
        println!();
        println!(
            "{:<20} {:>12} {:>16}",
            "strategy", "top-2 recall", "top-half spend"
        );
        for s in &report.selection {
            println!(
                "{:<20} {:>12.2} {:>16.2}",
                s.strategy.to_string(),
                s.top2_recall,
                s.top_half_spend_fraction
            );
        }
    }

    for warning in &report.warnings {
        println!("warning: {warning}");
    }
}
