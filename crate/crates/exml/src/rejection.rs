//! Classification with a reject option.
//!
//! A rejection model is a pair of kernel expansions `(h, g)`: `h` carries
//! the class decision and `g` gates it. A sample with `g(x) < 0` is
//! rejected; otherwise the label is the sign of `h(x)`, with `h(x) = 0`
//! resolved as positive. Training minimizes the mean of a calibrated
//! surrogate loss plus RKHS norms of both functions (see [`surrogate_loss`]
//! and [`train_rejection_model`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelParams};
use crate::solver;

/// Binary class label for supervised rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// What a rejection model says about one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Positive,
    Negative,
    Reject,
}

/// Ground truth for evaluation rows: a known class or `Unknown` for rows
/// whose class the observed features cannot determine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Positive,
    Negative,
    Unknown,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Positive => "positive",
            Outcome::Negative => "negative",
            Outcome::Unknown => "unknown",
        }
    }
}

impl From<Label> for Outcome {
    fn from(l: Label) -> Self {
        match l {
            Label::Positive => Outcome::Positive,
            Label::Negative => Outcome::Negative,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Decision plus the raw function values behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub decision: Decision,
    pub h_value: f64,
    pub g_value: f64,
}

/// Rejection cost `theta`, restricted to the open interval (0, 0.5).
///
/// At 0 rejection would be free and at 0.5 or above it is never cheaper
/// than guessing, so both ends are excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RejectionThreshold(f64);

impl RejectionThreshold {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 || theta >= 0.5 {
            return Err(Error::InvalidInput(format!(
                "rejection cost must lie strictly between 0 and 0.5, got {theta}"
            )));
        }
        Ok(Self(theta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RejectionThreshold {
    type Error = String;

    fn try_from(v: f64) -> std::result::Result<Self, String> {
        RejectionThreshold::new(v).map_err(|e| e.to_string())
    }
}

impl From<RejectionThreshold> for f64 {
    fn from(t: RejectionThreshold) -> f64 {
        t.0
    }
}

/// 0/1 rejection loss of the function values `(h, g)` against label `y`:
/// `theta` when `g <= 0` (the reject price), 1 when the sample is accepted
/// and misclassified, 0 otherwise.
pub fn zero_one_rejection_loss(h: f64, g: f64, y: Label, theta: RejectionThreshold) -> f64 {
    if g <= 0.0 {
        theta.value()
    } else if y.sign() * h < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Convex surrogate for [`zero_one_rejection_loss`]:
///
/// `max{ 1 + (g - y*h) / 2,  theta * (1 - g / (1 - 2*theta)),  0 }`
///
/// Pointwise at least the 0/1 rejection loss for every `theta` in (0, 0.5),
/// and jointly convex in `(h, g)` as a max of affine functions.
pub fn surrogate_loss(h: f64, g: f64, y: Label, theta: RejectionThreshold) -> f64 {
    let t = theta.value();
    let classify = 1.0 + (g - y.sign() * h) / 2.0;
    let reject = t * (1.0 - g / (1.0 - 2.0 * t));
    classify.max(reject).max(0.0)
}

/// Training hyperparameters for [`train_rejection_model`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight on the RKHS norm of the classifier `h`.
    pub c_h: f64,
    /// Weight on the RKHS norm of the gate `g`.
    pub c_g: f64,
    /// When set, `c_h` and `c_g` are divided by the training-set size, so
    /// regularization pressure per sample stays constant as datasets grow.
    /// With the mean-normalized loss term a fixed weight would otherwise
    /// shrink both functions toward zero on large datasets (the dual box
    /// constraint scales as 1/m) and every sample would be rejected.
    pub scale_by_dataset_size: bool,
    /// Relative duality-gap target; training stops once the objective is
    /// certified within this factor of the optimum (gap divided by
    /// `max(1, |objective|)`).
    pub solver_tolerance: f64,
    /// Epoch cap; exceeding it yields [`Error::Convergence`].
    pub max_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c_h: 1.0,
            c_g: 1.0,
            scale_by_dataset_size: true,
            solver_tolerance: 1e-6,
            max_iterations: 500_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.c_h.is_finite() || self.c_h <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "c_h must be finite and positive, got {}",
                self.c_h
            )));
        }
        if !self.c_g.is_finite() || self.c_g <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "c_g must be finite and positive, got {}",
                self.c_g
            )));
        }
        if !self.solver_tolerance.is_finite() || self.solver_tolerance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "solver_tolerance must be finite and positive, got {}",
                self.solver_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Regularization weights actually passed to the solver for a
    /// training set of `m` rows.
    pub(crate) fn effective_weights(&self, m: usize) -> (f64, f64) {
        if self.scale_by_dataset_size {
            (self.c_h / m as f64, self.c_g / m as f64)
        } else {
            (self.c_h, self.c_g)
        }
    }

    /// Pins scaled weights against a reference dataset size, returning a
    /// config with absolute weights. An experiment trains models on many
    /// subsets of one training set (cross-validation folds, acquisition
    /// episodes, augmented subsamples); rescaling per subset would make a
    /// 15-row episode model dozens of times more regularized than the
    /// final model it is standing in for, collapsing it to reject-all and
    /// erasing the risk differences feature selection depends on. Resolve
    /// once against the full set and every stage shares one constant.
    /// Calling this on an already-absolute config changes nothing.
    pub fn resolved_for(&self, m: usize) -> TrainConfig {
        let (c_h, c_g) = self.effective_weights(m.max(1));
        TrainConfig {
            c_h,
            c_g,
            scale_by_dataset_size: false,
            ..*self
        }
    }
}

/// Trained rejection model in representer form: both functions are kernel
/// expansions over the training points,
/// `h(x) = sum_i u[i] k(x, x_i)` and `g(x) = sum_i w[i] k(x, x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionModel {
    support_points: Vec<Vec<f64>>,
    u: Vec<f64>,
    w: Vec<f64>,
    kernel: KernelParams,
    theta: RejectionThreshold,
}

impl RejectionModel {
    pub fn support_points(&self) -> &[Vec<f64>] {
        &self.support_points
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn theta(&self) -> RejectionThreshold {
        self.theta
    }

    /// Input width the model expects.
    pub fn dimension(&self) -> usize {
        self.support_points[0].len()
    }

    /// Raw `(h(x), g(x))`.
    pub fn decision_values(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        let mut h = 0.0;
        let mut g = 0.0;
        for (i, sp) in self.support_points.iter().enumerate() {
            let k = kernel::gaussian_kernel(x, sp, &self.kernel)?;
            h += self.u[i] * k;
            g += self.w[i] * k;
        }
        Ok((h, g))
    }

    /// Serializes to JSON. The representation is exact: floats round-trip
    /// bit-for-bit through [`RejectionModel::from_json`].
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Deserializes and re-validates every structural invariant, so a
    /// hand-edited file cannot produce an inconsistent model.
    pub fn from_json(json: &str) -> Result<Self> {
        let model: RejectionModel = serde_json::from_str(json)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let m = self.support_points.len();
        if m == 0 {
            return Err(Error::InvalidInput("model has no support points".into()));
        }
        if self.u.len() != m || self.w.len() != m {
            return Err(Error::InvalidInput(format!(
                "coefficient lengths ({}, {}) do not match {} support points",
                self.u.len(),
                self.w.len(),
                m
            )));
        }
        let dim = self.support_points[0].len();
        for sp in &self.support_points {
            if sp.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: sp.len(),
                });
            }
        }
        if !self
            .u
            .iter()
            .chain(&self.w)
            .chain(self.support_points.iter().flatten())
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidInput("model contains non-finite values".into()));
        }
        Ok(())
    }
}

fn check_training_rows(points: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if points.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::InvalidInput("training rows have zero width".into()));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("training rows contain non-finite values".into()));
        }
    }
    Ok(())
}

/// Trains a rejection model by minimizing
///
/// `(1/m) * sum_i surrogate_loss(h(x_i), g(x_i), y_i, theta)
///  + c_h * |h|^2 + c_g * |g|^2`
///
/// over kernel expansions on the training points, where `|.|` is the RKHS
/// norm and `(c_h, c_g)` are the effective weights from `config`. The
/// returned model's objective is within `config.solver_tolerance`
/// (relative) of the optimum, certified by the duality gap. Training is
/// deterministic: identical inputs give identical coefficients.
pub fn train_rejection_model(
    points: &[Vec<f64>],
    labels: &[Label],
    theta: RejectionThreshold,
    kernel: &KernelParams,
    config: &TrainConfig,
) -> Result<RejectionModel> {
    config.validate()?;
    check_training_rows(points, labels)?;
    let gram = kernel::kernel_matrix(points, kernel)?;
    let signs: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let (c_h, c_g) = config.effective_weights(points.len());
    let sol = solver::solve_dual(
        &gram,
        &signs,
        theta.value(),
        c_h,
        c_g,
        config.solver_tolerance,
        config.max_iterations,
    )?;
    Ok(RejectionModel {
        support_points: points.to_vec(),
        u: sol.u,
        w: sol.w,
        kernel: *kernel,
        theta,
    })
}

/// Applies the rejection rule: reject iff `g(x) < 0`, otherwise label by
/// the sign of `h(x)` with zero resolved as positive. Note the boundary
/// asymmetry against [`zero_one_rejection_loss`], which already charges
/// `theta` at `g = 0`: the loss prices the gate pessimistically while
/// prediction lets a borderline gate through.
pub fn predict(model: &RejectionModel, x: &[f64]) -> Result<Prediction> {
    let (h, g) = model.decision_values(x)?;
    let decision = if g < 0.0 {
        Decision::Reject
    } else if h >= 0.0 {
        Decision::Positive
    } else {
        Decision::Negative
    };
    Ok(Prediction {
        decision,
        h_value: h,
        g_value: g,
    })
}

/// Mean 0/1 rejection loss of `model` on a labeled set, priced at `theta`
/// (which may differ from the theta the model was trained with).
pub fn empirical_risk(
    model: &RejectionModel,
    points: &[Vec<f64>],
    labels: &[Label],
    theta: RejectionThreshold,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidInput("empirical risk of an empty set".into()));
    }
    if points.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (p, &y) in points.iter().zip(labels) {
        let (h, g) = model.decision_values(p)?;
        total += zero_one_rejection_loss(h, g, y, theta);
    }
    Ok(total / points.len() as f64)
}
