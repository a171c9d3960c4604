//! Budgeted allocation of feature queries across candidates.
//!
//! Both strategies spend a fixed budget `B` of oracle queries (one query
//! buys one sample's block of one candidate feature) and return which
//! feature to keep plus the purchased data:
//!
//! * [`uniform_allocation`] splits the budget evenly: `floor(B / K)`
//!   samples per feature, the same sample indices everywhere, one
//!   evaluation round.
//! * [`median_elimination`] runs `ceil(log2 K)` episodes; episode `t`
//!   buys `floor(B / (T * |C_t|))` fresh samples for each still-active
//!   feature, retrains on everything bought so far, and keeps the better
//!   half (`ceil(|C_t|/2)` lowest empirical risks). Weak candidates stop
//!   consuming budget early, which concentrates spend on the strong ones.
//!
//! Sampling is without replacement against one shared index pool, so
//! every active feature sees the same rows and risks stay comparable
//! within an episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureOracle, TrainingSet};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::parallel;
use crate::rejection::{
    empirical_risk, train_rejection_model, Label, RejectionModel, RejectionThreshold, TrainConfig,
};

/// Spending scheme for the acquisition budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationStrategy {
    Uniform,
    MedianElimination,
}

impl std::fmt::Display for AllocationStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AllocationStrategy::Uniform => "uniform",
            AllocationStrategy::MedianElimination => "median_elimination",
        })
    }
}

/// How to pick the kernel bandwidth when training on an episode dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// Median of squared pairwise distances of the rows being trained on,
    /// recomputed per dataset. Falls back to a unit bandwidth when the
    /// heuristic is undefined (a single row, or a zero median from
    /// heavily duplicated rows) so tiny early episodes still train.
    MedianHeuristic,
    Fixed(KernelParams),
}

/// One evaluation round of an allocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based episode number.
    pub episode: usize,
    /// Fresh samples bought this episode for each active feature.
    pub fresh_samples: usize,
    /// Cumulative dataset size after this episode's purchases.
    pub dataset_size: usize,
    /// Features still in play when the episode started.
    pub active: Vec<usize>,
    /// Empirical risk per feature id; `None` for inactive features or
    /// features whose training failed.
    pub risks: Vec<Option<f64>>,
    /// Features dropped at the end of this episode.
    pub eliminated: Vec<usize>,
}

/// Full account of one allocation run. Spend bookkeeping mirrors the
/// oracle's audit log exactly: `budget_spent` equals the sum of
/// `per_feature_spend` and the number of audit records this run added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub strategy: AllocationStrategy,
    pub num_features: usize,
    /// Oracle budget available when the run started.
    pub budget_planned: u64,
    pub budget_spent: u64,
    pub per_feature_spend: Vec<u64>,
    pub episodes: Vec<EpisodeRecord>,
    /// Winning feature, or `None` when the budget bought nothing.
    pub selected_feature: Option<usize>,
    /// Rows acquired for the winner (0 when nothing was bought).
    pub selected_dataset_size: usize,
}

/// Training rows for one candidate feature: observed columns extended
/// with the purchased feature block.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub feature_id: usize,
    /// Indices into the training set, grouped by acquisition episode and
    /// ascending within each episode.
    pub sample_indices: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

/// Report plus the winner's data (absent when nothing could be bought).
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionOutcome {
    pub report: AllocationReport,
    pub dataset: Option<AugmentedDataset>,
}

/// Trains a rejection model on an augmented dataset and returns it with
/// its in-sample 0/1 rejection risk (always in `[0, theta..1]`'s range,
/// i.e. `[0, 1]`).
pub fn evaluate_feature(
    rows: &[Vec<f64>],
    labels: &[Label],
    theta: RejectionThreshold,
    bandwidth: BandwidthPolicy,
    config: &TrainConfig,
) -> Result<(RejectionModel, f64)> {
    let params = resolve_bandwidth(rows, bandwidth)?;
    let model = train_rejection_model(rows, labels, theta, &params, config)?;
    let risk = empirical_risk(&model, rows, labels, theta)?;
    Ok((model, risk))
}

fn resolve_bandwidth(rows: &[Vec<f64>], policy: BandwidthPolicy) -> Result<KernelParams> {
    match policy {
        BandwidthPolicy::Fixed(p) => Ok(p),
        BandwidthPolicy::MedianHeuristic => match kernel::median_bandwidth(rows) {
            Ok(p) => Ok(p),
            // One row, or a zero median: kernel values are then constant
            // (or the data is too small to estimate scale), so unit
            // bandwidth is as good as any. Dimension errors still abort.
            Err(Error::InvalidInput(_)) | Err(Error::DegenerateData(_)) if !rows.is_empty() => {
                KernelParams::new(1.0)
            }
            Err(e) => Err(e),
        },
    }
}

fn check_oracle_matches(train: &TrainingSet, oracle: &FeatureOracle) -> Result<()> {
    if oracle.num_samples() != train.len() {
        return Err(Error::InvalidInput(format!(
            "oracle covers {} samples but the training set has {}",
            oracle.num_samples(),
            train.len()
        )));
    }
    Ok(())
}

/// Draws `count` indices from `pool` without replacement, removing them.
/// Returned indices are ascending; the draw is deterministic in `rng`.
fn draw_without_replacement(
    rng: &mut ChaCha8Rng,
    pool: &mut Vec<usize>,
    count: usize,
) -> Vec<usize> {
    debug_assert!(count <= pool.len());
    for t in 0..count {
        let j = rng.random_range(t..pool.len());
        pool.swap(t, j);
    }
    let mut drawn: Vec<usize> = pool.drain(..count).collect();
    drawn.sort_unstable();
    drawn
}

/// `ceil(log2 k)` for `k >= 2`; 1 for the degenerate single-feature case,
/// which gets a single evaluation episode.
fn episode_count(k: usize) -> usize {
    if k <= 1 {
        1
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as usize
    }
}

fn build_rows(
    train: &TrainingSet,
    indices: &[usize],
    blocks: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<Label>) {
    let rows = indices
        .iter()
        .zip(blocks)
        .map(|(&s, block)| {
            let mut r = train.observed()[s].to_vec();
            r.extend_from_slice(block);
            r
        })
        .collect();
    let labels = indices.iter().map(|&s| train.labels()[s]).collect();
    (rows, labels)
}

/// Risk comparison order: lower risk wins, ties go to the lower feature id.
fn rank_features(entries: &mut [(usize, f64)]) {
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
}

/// Dataset size the surviving feature accumulates by the end of the
/// halving schedule, before pool exhaustion: the sum of per-episode
/// quotas n_t = floor(B / (T * |C_t|)) as the active set halves.
fn planned_survivor_size(budget: u64, k: usize, m: usize) -> usize {
    if k <= 1 {
        return usize::try_from(budget).unwrap_or(usize::MAX).min(m);
    }
    let total = episode_count(k) as u64;
    let mut active = k as u64;
    let mut size = 0u64;
    for _ in 0..total {
        size += budget / (total * active);
        active = active.div_ceil(2);
    }
    usize::try_from(size).unwrap_or(usize::MAX).min(m)
}

/// Splits the budget evenly across all `K` candidates: `floor(B / K)`
/// samples each (capped at the training-set size), the same sample
/// indices for every feature, one round of training, lowest risk wins.
pub fn uniform_allocation(
    train: &TrainingSet,
    oracle: &mut FeatureOracle,
    theta: RejectionThreshold,
    config: &TrainConfig,
    seed: u64,
) -> Result<AcquisitionOutcome> {
    config.validate()?;
    check_oracle_matches(train, oracle)?;
    let k = oracle.num_features();
    let budget = oracle.remaining();
    let n = usize::try_from(budget / k as u64)
        .unwrap_or(usize::MAX)
        .min(train.len());
    // Every candidate's model trains on exactly n rows, so scaled weights
    // resolve against that size; an absolute config passes through as is.
    let config = &config.resolved_for(n.max(1));

    let mut report = AllocationReport {
        strategy: AllocationStrategy::Uniform,
        num_features: k,
        budget_planned: budget,
        budget_spent: 0,
        per_feature_spend: vec![0; k],
        episodes: vec![EpisodeRecord {
            episode: 1,
            fresh_samples: n,
            dataset_size: n,
            active: (0..k).collect(),
            risks: vec![None; k],
            eliminated: Vec::new(),
        }],
        selected_feature: None,
        selected_dataset_size: 0,
    };

    if n == 0 {
        // Budget too small to buy even one sample per feature: selection
        // is undefined and the caller falls back to the unaugmented model.
        return Ok(AcquisitionOutcome {
            report,
            dataset: None,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..train.len()).collect();
    let indices = draw_without_replacement(&mut rng, &mut pool, n);

    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k);
    for f in 0..k {
        let before = oracle.spent();
        let mut per = Vec::with_capacity(n);
        for &s in &indices {
            match oracle.query(s, f) {
                Ok(block) => per.push(block.to_vec()),
                Err(e) => {
                    report.per_feature_spend[f] = oracle.spent() - before;
                    report.budget_spent = report.per_feature_spend.iter().sum();
                    return Err(Error::Allocation {
                        message: e.to_string(),
                        partial: Box::new(report),
                    });
                }
            }
        }
        report.per_feature_spend[f] = oracle.spent() - before;
        blocks.push(per);
    }
    report.budget_spent = report.per_feature_spend.iter().sum();

    let outcomes = parallel::map_range(k, |f| {
        let (rows, labels) = build_rows(train, &indices, &blocks[f]);
        evaluate_feature(&rows, &labels, theta, BandwidthPolicy::MedianHeuristic, config)
            .map(|(_, risk)| risk)
    });

    let mut ranked = Vec::with_capacity(k);
    for (f, outcome) in outcomes.iter().enumerate() {
        match outcome {
            Ok(risk) => {
                report.episodes[0].risks[f] = Some(*risk);
                ranked.push((f, *risk));
            }
            Err(e) => {
                return Err(Error::Allocation {
                    message: format!("feature {f}: {e}"),
                    partial: Box::new(report),
                });
            }
        }
    }
    rank_features(&mut ranked);
    let winner = ranked[0].0;
    report.selected_feature = Some(winner);
    report.selected_dataset_size = n;

    let (rows, labels) = build_rows(train, &indices, &blocks[winner]);
    Ok(AcquisitionOutcome {
        report,
        dataset: Some(AugmentedDataset {
            feature_id: winner,
            sample_indices: indices,
            rows,
            labels,
        }),
    })
}

/// Successive-halving allocation: see the module docs for the schedule.
/// All active features share one cumulative sample set, so each episode's
/// risks are computed on identical rows.
pub fn median_elimination(
    train: &TrainingSet,
    oracle: &mut FeatureOracle,
    theta: RejectionThreshold,
    config: &TrainConfig,
    seed: u64,
) -> Result<AcquisitionOutcome> {
    config.validate()?;
    check_oracle_matches(train, oracle)?;
    let k = oracle.num_features();
    let m = train.len();
    let budget = oracle.remaining();
    let total_episodes = episode_count(k);
    // Episode models are successive proxies for the survivor's final
    // model, so scaled weights resolve once against the dataset size that
    // model will see. Resolving per episode instead would regularize a
    // first-episode model several times harder than the last one, driving
    // small episodes to reject-all and tying every candidate's risk at
    // theta, where elimination degenerates to the index tie-break.
    let config = &config.resolved_for(planned_survivor_size(budget, k, m).max(1));

    let mut report = AllocationReport {
        strategy: AllocationStrategy::MedianElimination,
        num_features: k,
        budget_planned: budget,
        budget_spent: 0,
        per_feature_spend: vec![0; k],
        episodes: Vec::with_capacity(total_episodes),
        selected_feature: None,
        selected_dataset_size: 0,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..m).collect();
    let mut acquired: Vec<usize> = Vec::new();
    let mut blocks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    let mut active: Vec<usize> = (0..k).collect();
    let mut last_risks: Vec<Option<f64>> = vec![None; k];

    for episode in 1..=total_episodes {
        let quota = if k == 1 {
            usize::try_from(budget).unwrap_or(usize::MAX).min(m)
        } else {
            usize::try_from(budget / (total_episodes as u64 * active.len() as u64))
                .unwrap_or(usize::MAX)
        };
        let fresh = quota.min(pool.len());

        if fresh > 0 {
            let drawn = draw_without_replacement(&mut rng, &mut pool, fresh);
            for &f in &active {
                let before = oracle.spent();
                for &s in &drawn {
                    match oracle.query(s, f) {
                        Ok(block) => blocks[f].push(block.to_vec()),
                        Err(e) => {
                            report.per_feature_spend[f] += oracle.spent() - before;
                            report.budget_spent = report.per_feature_spend.iter().sum();
                            return Err(Error::Allocation {
                                message: e.to_string(),
                                partial: Box::new(report),
                            });
                        }
                    }
                }
                report.per_feature_spend[f] += oracle.spent() - before;
            }
            acquired.extend(drawn);
        }
        report.budget_spent = report.per_feature_spend.iter().sum();

        if acquired.is_empty() {
            // Nothing to train on yet; no basis for elimination either.
            report.episodes.push(EpisodeRecord {
                episode,
                fresh_samples: fresh,
                dataset_size: 0,
                active: active.clone(),
                risks: vec![None; k],
                eliminated: Vec::new(),
            });
            continue;
        }

        let outcomes = parallel::map_slice(&active, |&f| {
            let (rows, labels) = build_rows(train, &acquired, &blocks[f]);
            evaluate_feature(&rows, &labels, theta, BandwidthPolicy::MedianHeuristic, config)
                .map(|(_, risk)| risk)
        });

        let mut risks = vec![None; k];
        let mut ranked = Vec::with_capacity(active.len());
        for (&f, outcome) in active.iter().zip(&outcomes) {
            match outcome {
                Ok(risk) => {
                    risks[f] = Some(*risk);
                    ranked.push((f, *risk));
                }
                Err(e) => {
                    report.episodes.push(EpisodeRecord {
                        episode,
                        fresh_samples: fresh,
                        dataset_size: acquired.len(),
                        active: active.clone(),
                        risks,
                        eliminated: Vec::new(),
                    });
                    return Err(Error::Allocation {
                        message: format!("episode {episode}, feature {f}: {e}"),
                        partial: Box::new(report),
                    });
                }
            }
        }
        last_risks = risks.clone();

        rank_features(&mut ranked);
        let keep = active.len().div_ceil(2);
        let kept: Vec<usize> = ranked[..keep].iter().map(|&(f, _)| f).collect();
        let mut eliminated: Vec<usize> = ranked[keep..].iter().map(|&(f, _)| f).collect();
        eliminated.sort_unstable();
        report.episodes.push(EpisodeRecord {
            episode,
            fresh_samples: fresh,
            dataset_size: acquired.len(),
            active: active.clone(),
            risks,
            eliminated,
        });
        // Preserve id order among the keepers; rank order is only for
        // deciding who stays.
        let mut next: Vec<usize> = kept;
        next.sort_unstable();
        active = next;
    }

    if acquired.is_empty() {
        return Ok(AcquisitionOutcome {
            report,
            dataset: None,
        });
    }

    let mut finalists: Vec<(usize, f64)> = active
        .iter()
        .filter_map(|&f| last_risks[f].map(|r| (f, r)))
        .collect();
    rank_features(&mut finalists);
    let winner = finalists[0].0;
    report.selected_feature = Some(winner);
    report.selected_dataset_size = acquired.len();

    let (rows, labels) = build_rows(train, &acquired, &blocks[winner]);
    Ok(AcquisitionOutcome {
        report,
        dataset: Some(AugmentedDataset {
            feature_id: winner,
            sample_indices: acquired,
            rows,
            labels,
        }),
    })
}
