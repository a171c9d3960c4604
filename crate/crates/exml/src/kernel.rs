//! Gaussian kernel with a median-of-squared-distances bandwidth heuristic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

/// Bandwidth for [`gaussian_kernel`]: `k(x, y) = exp(-||x - y||^2 / gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GammaRepr")]
pub struct KernelParams {
    gamma: f64,
}

/// Serde surrogate so deserialized values pass the same validation as
/// [`KernelParams::new`].
#[derive(Deserialize)]
struct GammaRepr {
    gamma: f64,
}

impl TryFrom<GammaRepr> for KernelParams {
    type Error = String;

    fn try_from(repr: GammaRepr) -> std::result::Result<Self, String> {
        KernelParams::new(repr.gamma).map_err(|e| e.to_string())
    }
}

impl KernelParams {
    /// Requires `gamma` finite and strictly positive.
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be finite and positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// Evaluates `exp(-||x - y||^2 / gamma)`.
///
/// Errors with [`Error::DimensionMismatch`] when the two points disagree
/// in width.
pub fn gaussian_kernel(x: &[f64], y: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok((-squared_distance(x, y) / params.gamma).exp())
}

/// Median of squared pairwise distances over all unordered distinct pairs.
///
/// An even pair count takes the mean of the two middle order statistics.
/// Requires at least two points; a zero median (more than half of all
/// pairs coincide) is reported as [`Error::DegenerateData`] rather than
/// returned, since it would make every kernel evaluation 0 or 1.
pub fn median_bandwidth(points: &[Vec<f64>]) -> Result<KernelParams> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "bandwidth heuristic needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
    }
    let n = points.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(&points[i], &points[j]));
        }
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateData(
            "median pairwise squared distance is zero".into(),
        ));
    }
    KernelParams::new(median)
}

/// Dense Gram matrix `K[i][j] = k(points[i], points[j])`.
///
/// Rows are computed independently and in index order, so the result is
/// identical with and without the `parallel` feature.
pub fn kernel_matrix(points: &[Vec<f64>], params: &KernelParams) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::InvalidInput("kernel matrix of zero points".into()));
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
    }
    let gamma = params.gamma;
    Ok(parallel::map_slice(points, |xi| {
        points
            .iter()
            .map(|xj| (-squared_distance(xi, xj) / gamma).exp())
            .collect()
    }))
}
