//! Synthetic three-cluster benchmark generator.
//!
//! Points live in 3D: a negative cluster at `(-a, 0, -5a)`, a positive
//! cluster at `(a, 0, 5a)` (both with covariance `3a * I`), and an
//! unknown cluster at the origin with covariance `1.5a * I`. Only the
//! first two coordinates are observed, so the unknown cluster is
//! inseparable from the others until the third axis is (partially)
//! revealed. Each candidate feature is a slice through that axis at an
//! angle: `cos(angle) * x + sin(angle) * z`. At 90 degrees the candidate
//! is the hidden coordinate itself; smaller angles mix in the already
//! observed `x` and carry less new information, which fixes the ground
//! truth quality ranking used to score feature selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CandidateTable, TestSet, TrainingSet};
use crate::error::{Error, Result};
use crate::rejection::{Label, Outcome};

/// Geometry and size of one generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Cluster separation scale; means and covariances all derive from it.
    pub a: f64,
    /// Points per cluster, for train and test alike.
    pub n_per_class: usize,
    /// Candidate slice angles in degrees, each in (0, 90].
    pub angles_deg: Vec<f64>,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || self.a <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "cluster scale a must be finite and positive, got {}",
                self.a
            )));
        }
        if self.n_per_class == 0 {
            return Err(Error::InvalidInput("n_per_class must be positive".into()));
        }
        if self.angles_deg.is_empty() {
            return Err(Error::InvalidInput("no candidate angles given".into()));
        }
        for (i, &deg) in self.angles_deg.iter().enumerate() {
            if !deg.is_finite() || deg <= 0.0 || deg > 90.0 {
                return Err(Error::InvalidInput(format!(
                    "candidate angle must lie in (0, 90] degrees, got {deg}"
                )));
            }
            // Duplicate angles would collide in feature names and add
            // nothing: the features would be identical columns.
            if self.angles_deg[..i].contains(&deg) {
                return Err(Error::InvalidInput(format!(
                    "candidate angle {deg} appears more than once"
                )));
            }
        }
        Ok(())
    }
}

/// Everything one repetition needs: train split, its candidate table,
/// test split (with free candidate blocks), and the ground-truth feature
/// ranking implied by the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub train: TrainingSet,
    pub train_candidates: CandidateTable,
    pub test: TestSet,
    /// Feature ids, best first: larger angle reveals more of the hidden
    /// axis. Ties keep the lower id first.
    pub quality_ranking: Vec<usize>,
}

/// Unit direction of a candidate slice. 90 degrees maps to exactly
/// (0, 1): `cos` of the floating-point radian value would be ~6e-17, and
/// the hidden-coordinate candidate is defined to be exact.
fn slice_direction(angle_deg: f64) -> (f64, f64) {
    if angle_deg == 90.0 {
        (0.0, 1.0)
    } else {
        let rad = angle_deg.to_radians();
        (rad.cos(), rad.sin())
    }
}

fn feature_name(angle_deg: f64) -> String {
    format!("angle_{angle_deg}")
}

struct ClusterSpec {
    mean: [f64; 3],
    std: f64,
    class: Option<Label>,
}

fn draw_points(
    rng: &mut ChaCha8Rng,
    normal: &Normal<f64>,
    clusters: &[ClusterSpec],
    n: usize,
) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(clusters.len() * n);
    for c in clusters {
        for _ in 0..n {
            let mut p = [0.0; 3];
            for (d, v) in p.iter_mut().enumerate() {
                *v = c.mean[d] + c.std * normal.sample(rng);
            }
            out.push(p);
        }
    }
    out
}

fn candidate_table(
    points: &[[f64; 3]],
    angles: &[f64],
) -> Result<CandidateTable> {
    let names: Vec<String> = angles.iter().map(|&d| feature_name(d)).collect();
    let column_labels: Vec<Vec<String>> = names.iter().map(|n| vec![n.clone()]).collect();
    let values = points
        .iter()
        .map(|p| {
            angles
                .iter()
                .map(|&deg| {
                    let (cos, sin) = slice_direction(deg);
                    vec![cos * p[0] + sin * p[2]]
                })
                .collect()
        })
        .collect();
    CandidateTable::new(names, column_labels, values)
}

/// Deterministically generates one train/test pair from `config.seed`.
/// Identical configs give bit-identical bundles.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticBundle> {
    config.validate()?;
    let a = config.a;
    let n = config.n_per_class;
    // Covariances are isotropic; 3a and 1.5a are variances.
    let spread = (3.0 * a).sqrt();
    let unknown_spread = (1.5 * a).sqrt();
    let clusters = [
        ClusterSpec {
            mean: [-a, 0.0, -5.0 * a],
            std: spread,
            class: Some(Label::Negative),
        },
        ClusterSpec {
            mean: [a, 0.0, 5.0 * a],
            std: spread,
            class: Some(Label::Positive),
        },
        ClusterSpec {
            mean: [0.0, 0.0, 0.0],
            std: unknown_spread,
            class: None,
        },
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Draw order is part of the format: train points (negative, positive,
    // unknown cluster), then the random train labels for the unknown
    // cluster, then test points in the same cluster order.
    let train_points = draw_points(&mut rng, &normal, &clusters, n);
    let unknown_train_labels: Vec<Label> = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let test_points = draw_points(&mut rng, &normal, &clusters, n);

    let mut train_labels = Vec::with_capacity(3 * n);
    let mut test_truth = Vec::with_capacity(3 * n);
    for c in &clusters {
        match c.class {
            Some(l) => {
                for _ in 0..n {
                    train_labels.push(l);
                    test_truth.push(Outcome::from(l));
                }
            }
            None => {
                // Unknown-cluster training rows get arbitrary labels:
                // the learner is supposed to reject them, not fit them.
                for &label in &unknown_train_labels {
                    train_labels.push(label);
                    test_truth.push(Outcome::Unknown);
                }
            }
        }
    }

    let observe = |pts: &[[f64; 3]]| -> Vec<Vec<f64>> {
        pts.iter().map(|p| vec![p[0], p[1]]).collect()
    };
    let train_ids: Vec<String> = (0..3 * n).map(|i| format!("train-{i:04}")).collect();
    let test_ids: Vec<String> = (0..3 * n).map(|i| format!("test-{i:04}")).collect();

    let train = TrainingSet::new(train_ids, observe(&train_points), train_labels)?;
    let train_candidates = candidate_table(&train_points, &config.angles_deg)?;
    let test_candidates = candidate_table(&test_points, &config.angles_deg)?;
    let test = TestSet::new(test_ids, observe(&test_points), test_candidates, test_truth)?;

    let mut quality_ranking: Vec<usize> = (0..config.angles_deg.len()).collect();
    quality_ranking.sort_by(|&i, &j| {
        config.angles_deg[j]
            .partial_cmp(&config.angles_deg[i])
            .expect("angles validated finite")
            .then(i.cmp(&j))
    });

    Ok(SyntheticBundle {
        train,
        train_candidates,
        test,
        quality_ranking,
    })
}
