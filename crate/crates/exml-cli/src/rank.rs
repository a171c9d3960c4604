//! `rank`: compute and save the reference candidate-feature ranking.

use std::path::Path;

use exml::data::{generate_synthetic, load_multiview_csv, CandidateTable, SyntheticConfig};
use exml::harness::{compute_true_ranking, DataSpec, ExperimentConfig, QUALITY_THETA};

use crate::{runtime, CmdResult};

/// Materializes the config's dataset with the master seed, judges every
/// candidate feature on the test split, and writes `ranking.json`.
pub fn cmd_rank(config: &ExperimentConfig, out: &Path) -> CmdResult {
    let (train, candidates, test) = match &config.data {
        DataSpec::Synthetic {
            a,
            n_per_class,
            angles_deg,
        } => {
            let bundle = generate_synthetic(&SyntheticConfig {
                a: *a,
                n_per_class: *n_per_class,
                angles_deg: angles_deg.clone(),
                seed: config.seed,
            })
            .map_err(runtime)?;
            (bundle.train, bundle.train_candidates, bundle.test)
        }
        DataSpec::Csv(cfg) => {
            let data = load_multiview_csv(cfg, config.seed).map_err(runtime)?;
            (data.train, data.train_candidates, data.test)
        }
    };

    let ranking = compute_true_ranking(&train, &candidates, &test, &config.training)
        .map_err(runtime)?;

    let document = serde_json::json!({
        "schema_version": 1,
        "theta": QUALITY_THETA,
        "seed": config.seed,
        "ranking": ranking,
        "features": ranked_features(&candidates, &ranking),
    });
    std::fs::create_dir_all(out).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    let path = out.join("ranking.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&document).map_err(runtime)?,
    )
    .map_err(|e| runtime(format!("{}: {e}", path.display())))?;

    for (place, &id) in ranking.iter().enumerate() {
        println!("{}. {} (id {id})", place + 1, candidates.feature_name(id));
    }
    println!("ranking written to {}", path.display());
    Ok(())
}

fn ranked_features(candidates: &CandidateTable, ranking: &[usize]) -> Vec<serde_json::Value> {
    ranking
        .iter()
        .map(|&id| {
            serde_json::json!({
                "id": id,
                "name": candidates.feature_name(id),
            })
        })
        .collect()
}
