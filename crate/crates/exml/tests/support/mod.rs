//! Reference QP solver used to cross-check the production trainer.
//!
//! Solves `min (1/2) z'Qz + c'z  s.t.  Az <= b` with a dense Mehrotra
//! predictor-corrector interior-point method. Shares no code with the
//! trainer under test: different reformulation (primal slack QP instead
//! of the dual), different algorithm family, different linear algebra.
//! Written for clarity over speed; the only caller is the test suite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use exml::kernel::{kernel_matrix, KernelParams};
use exml::rejection::{
    surrogate_loss, train_rejection_model, Label, RejectionThreshold, TrainConfig,
};

/// minimize (1/2) z'Qz + c'z  subject to  Az <= b.
pub struct Qp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Slack reformulation of regularized surrogate-risk minimization over
/// kernel expansions h = Ku, g = Kw. Variables z = (u, w, xi) in R^{3m};
/// objective (1/m) sum_i xi_i + c_h u'Ku + c_g w'Kw; per-sample
/// constraints encode xi_i >= each affine piece of the surrogate:
///
///   -(y_i/2) K_i u + (1/2) K_i w - xi_i <= -1
///   -tau K_i w - xi_i <= -theta          with tau = theta/(1-2 theta)
///   -xi_i <= 0
pub fn erm_qp(gram: &[Vec<f64>], signs: &[f64], theta: f64, c_h: f64, c_g: f64) -> Qp {
    let m = gram.len();
    let nv = 3 * m;
    let mut q = DMatrix::zeros(nv, nv);
    for i in 0..m {
        for j in 0..m {
            q[(i, j)] = 2.0 * c_h * gram[i][j];
            q[(m + i, m + j)] = 2.0 * c_g * gram[i][j];
        }
    }
    // Tiny ridge keeps the normal matrix factorizable even when the Gram
    // matrix is numerically singular; it perturbs the objective by
    // O(1e-10 |z|^2), far below the comparison tolerance.
    for i in 0..nv {
        q[(i, i)] += 1e-10;
    }
    let mut c = DVector::zeros(nv);
    for i in 0..m {
        c[2 * m + i] = 1.0 / m as f64;
    }
    let tau = theta / (1.0 - 2.0 * theta);
    let mut a = DMatrix::zeros(3 * m, nv);
    let mut b = DVector::zeros(3 * m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = -0.5 * signs[i] * gram[i][j];
            a[(i, m + j)] = 0.5 * gram[i][j];
            a[(m + i, m + j)] = -tau * gram[i][j];
        }
        a[(i, 2 * m + i)] = -1.0;
        b[i] = -1.0;
        a[(m + i, 2 * m + i)] = -1.0;
        b[m + i] = -theta;
        a[(2 * m + i, 2 * m + i)] = -1.0;
    }
    Qp { q, c, a, b }
}

/// Largest step in direction `dx` that keeps `x` strictly positive;
/// infinite when nothing blocks.
fn blocking_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..x.len() {
        if dx[i] < 0.0 {
            alpha = alpha.min(-x[i] / dx[i]);
        }
    }
    alpha
}

/// Mehrotra predictor-corrector from the standard infeasible start
/// (z = 0, s = lam = 1); returns the primal minimizer.
///
/// The duality gap s'lam bounds the objective error, so the exit
/// tolerances below leave orders of magnitude to spare against the
/// 1e-4 comparisons made by the callers.
pub fn solve_qp(qp: &Qp) -> Result<DVector<f64>, String> {
    let nv = qp.q.nrows();
    let nc = qp.a.nrows();
    let mut z = DVector::zeros(nv);
    let mut s = DVector::from_element(nc, 1.0);
    let mut lam = DVector::from_element(nc, 1.0);
    let scale = 1.0 + qp.b.amax().max(qp.c.amax());
    // Best iterate seen, by worst-of-three criterion; the endgame can
    // stall in floating point after the iterate is already excellent.
    let mut best: Option<(f64, DVector<f64>)> = None;

    for _ in 0..300 {
        let r_d = &qp.q * &z + &qp.c + qp.a.transpose() * &lam;
        let r_p = &qp.a * &z + &s - &qp.b;
        let mu = s.dot(&lam) / nc as f64;
        let worst = (r_d.amax() / scale).max(r_p.amax() / scale).max(mu / scale);
        if best.as_ref().is_none_or(|(w, _)| worst < *w) {
            best = Some((worst, z.clone()));
        }
        if r_d.amax() <= 1e-7 * scale && r_p.amax() <= 1e-7 * scale && mu <= 1e-9 * scale {
            return Ok(z);
        }

        // Normal matrix Q + A' diag(lam/s) A, upper triangle then mirror.
        // Clamping the weights bounds the conditioning; it biases only
        // the search direction, never the optimality test above.
        let mut normal = qp.q.clone();
        for i in 0..nc {
            let d = (lam[i] / s[i]).clamp(1e-8, 1e8);
            for j in 0..nv {
                let aij = qp.a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                for k in j..nv {
                    normal[(j, k)] += d * aij * qp.a[(i, k)];
                }
            }
        }
        for j in 0..nv {
            for k in 0..j {
                normal[(j, k)] = normal[(k, j)];
            }
        }
        // Near convergence the active-constraint weights lam/s explode
        // and the factorization can fail in floating point; escalate a
        // diagonal shift until it succeeds. The shift perturbs only the
        // search direction, never the optimality test above.
        let diag_max = (0..nv).map(|j| normal[(j, j)]).fold(1.0_f64, f64::max);
        let mut shift = 0.0;
        let chol = loop {
            let mut shifted = normal.clone();
            for j in 0..nv {
                shifted[(j, j)] += shift;
            }
            match nalgebra::linalg::Cholesky::new(shifted) {
                Some(c) => break c,
                None if shift < 1e-2 * diag_max => {
                    shift = if shift == 0.0 {
                        1e-12 * diag_max
                    } else {
                        shift * 100.0
                    };
                }
                None => return Err("normal matrix is not positive definite".into()),
            }
        };

        // Newton direction for a given complementarity target rc:
        //   Q dz + A' dlam = -r_d
        //   A dz + ds      = -r_p
        //   Lam ds + S dlam = -rc
        let direction = |rc: &DVector<f64>| {
            let mut v = DVector::zeros(nc);
            for i in 0..nc {
                v[i] = (-rc[i] + lam[i] * r_p[i]) / s[i];
            }
            let rhs = -&r_d - qp.a.transpose() * &v;
            let dz = chol.solve(&rhs);
            let ds = -&r_p - &qp.a * &dz;
            let mut dlam = DVector::zeros(nc);
            for i in 0..nc {
                dlam[i] = (-rc[i] - lam[i] * ds[i]) / s[i];
            }
            (dz, ds, dlam)
        };

        // Predictor: aim at zero complementarity, observe how far we get.
        let rc_aff = DVector::from_fn(nc, |i, _| s[i] * lam[i]);
        let (_, ds_aff, dlam_aff) = direction(&rc_aff);
        let ap_aff = blocking_step(&s, &ds_aff).min(1.0);
        let ad_aff = blocking_step(&lam, &dlam_aff).min(1.0);
        let mu_aff = (0..nc)
            .map(|i| (s[i] + ap_aff * ds_aff[i]) * (lam[i] + ad_aff * dlam_aff[i]))
            .sum::<f64>()
            / nc as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector: recenter and compensate the predictor's curvature.
        let rc = DVector::from_fn(nc, |i, _| {
            s[i] * lam[i] + ds_aff[i] * dlam_aff[i] - sigma * mu
        });
        let (dz, ds, dlam) = direction(&rc);
        let ap = (0.995 * blocking_step(&s, &ds)).min(1.0);
        let ad = (0.995 * blocking_step(&lam, &dlam)).min(1.0);
        z += ap * &dz;
        s += ap * &ds;
        lam += ad * &dlam;
    }
    // Stalled: accept the best iterate if it is still far more accurate
    // than anything the comparisons need.
    match best {
        Some((worst, z)) if worst <= 1e-6 => Ok(z),
        _ => Err("interior-point iteration limit reached".into()),
    }
}

/// Regularized surrogate risk at (u, w): the quantity both solvers
/// minimize, evaluated from scratch.
pub fn erm_objective(
    gram: &[Vec<f64>],
    labels: &[Label],
    theta: RejectionThreshold,
    c_h: f64,
    c_g: f64,
    u: &[f64],
    w: &[f64],
) -> f64 {
    let m = gram.len();
    let dot = |row: &[f64], v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let risk: f64 = (0..m)
        .map(|i| surrogate_loss(dot(&gram[i], u), dot(&gram[i], w), labels[i], theta))
        .sum::<f64>()
        / m as f64;
    let quad = |v: &[f64]| (0..m).map(|i| v[i] * dot(&gram[i], v)).sum::<f64>();
    risk + c_h * quad(u) + c_g * quad(w)
}

/// Trains `cases` random small instances with the production solver and
/// with the interior-point oracle, comparing the achieved objectives.
/// Returns the worst relative gap, or a description of the first case
/// whose gap exceeds `tolerance` (or whose solver failed outright).
pub fn compare_trainer_with_oracle(
    cases: usize,
    seed: u64,
    tolerance: f64,
) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = 0.0_f64;
    for case in 0..cases {
        let m = rng.random_range(1..=20);
        let d = rng.random_range(1..=3usize);
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<Label> = (0..m)
            .map(|_| {
                if rng.random_bool(0.5) {
                    Label::Positive
                } else {
                    Label::Negative
                }
            })
            .collect();
        let theta = RejectionThreshold::new(rng.random_range(0.05..0.45)).unwrap();
        let c_h = rng.random_range(0.02..1.0);
        let c_g = rng.random_range(0.02..1.0);
        let kernel = KernelParams::new(rng.random_range(0.5..8.0)).unwrap();
        let config = TrainConfig {
            c_h,
            c_g,
            // Raw weights: the oracle sees exactly these.
            scale_by_dataset_size: false,
            solver_tolerance: 1e-8,
            max_iterations: 2_000_000,
        };

        let case_info = || format!("case {case} (m={m}, d={d}, theta={:.3})", theta.value());
        let model = train_rejection_model(&points, &labels, theta, &kernel, &config)
            .map_err(|e| format!("{}: trainer failed: {e}", case_info()))?;
        let gram = kernel_matrix(&points, &kernel).unwrap();
        let trained = erm_objective(&gram, &labels, theta, c_h, c_g, model.u(), model.w());

        let signs: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let qp = erm_qp(&gram, &signs, theta.value(), c_h, c_g);
        let z = solve_qp(&qp).map_err(|e| format!("{}: oracle failed: {e}", case_info()))?;
        let reference = erm_objective(
            &gram,
            &labels,
            theta,
            c_h,
            c_g,
            &z.as_slice()[..m],
            &z.as_slice()[m..2 * m],
        );

        let gap = (trained - reference).abs() / reference.abs().max(1.0);
        if gap > tolerance {
            return Err(format!(
                "{}: trained objective {trained} vs oracle {reference} (relative gap {gap:.2e})",
                case_info()
            ));
        }
        worst_gap = worst_gap.max(gap);
    }
    Ok(worst_gap)
}
