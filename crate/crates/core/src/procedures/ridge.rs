//! Ridge-based estimate of the positive mass of a symmetric-support three-point prior.

use crate::error::{invalid, Error, Result};
use crate::normal;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub const PI1_GRID_POINTS: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeEstimate {
    pub pi1: f64,
    /// Debiasing factor: `v * beta_ridge` behaves like `beta0 + tau Z`.
    pub v: f64,
    pub tau: f64,
}

/// `(X^T X + 2 lambda I)^{-1} X^T Y`.
pub fn ridge_estimator(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("Y has {} rows, X has {}", y.len(), x.nrows())));
    }
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += 2.0 * lambda;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Estimation("ridge system is not positive definite".into()))?;
    Ok(chol.solve(&x.tr_mul(y)))
}

/// Roots of `delta v^2 - (1 + delta + 2 lambda delta) v + 1 = 0`, larger first.
pub fn debias_roots(delta: f64, lambda: f64) -> (f64, f64) {
    let b = 1.0 + delta + 2.0 * lambda * delta;
    let disc = (b * b - 4.0 * delta).max(0.0).sqrt();
    let hi = (b + disc) / (2.0 * delta);
    (hi, 1.0 / (delta * hi))
}

/// Effective noise of `v * beta_ridge` given the debiasing factor `v`, or
/// `None` when the self-consistent equation has no positive solution.
pub fn ridge_noise(v: f64, delta: f64, lambda: f64, sigma2: f64, second_moment: f64) -> Option<f64> {
    let denom = delta - 1.0 / (v * v);
    if !(v > 0.0 && denom > 0.0) {
        return None;
    }
    let shrink = v - 1.0 - 2.0 * lambda;
    let tau2 = (delta * sigma2 + delta * delta * shrink * shrink * second_moment) / denom;
    (tau2 > 0.0).then(|| tau2.sqrt())
}

/// Log-likelihood of `u` under `pi1 N(1, tau^2) + pi0 N(0, tau^2) + (1 - pi0 - pi1) N(-1, tau^2)`,
/// up to a constant.
pub fn mixture_log_likelihood(u: &[f64], pi0: f64, pi1: f64, tau: f64) -> f64 {
    let pim1 = (1.0 - pi0 - pi1).max(0.0);
    u.iter()
        .map(|&x| {
            let terms = [
                (pi0, x / tau),
                (pi1, (x - 1.0) / tau),
                (pim1, (x + 1.0) / tau),
            ];
            let logs: Vec<f64> = terms
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, z)| w.ln() - 0.5 * z * z)
                .collect();
            normal::log_sum_exp(logs.iter().copied())
        })
        .sum()
}

/// Estimates `pi1` from `(Y, X_sub)` with `pi0` and `sigma2` known.
pub fn estimate_prior_ridge(
    y: &DVector<f64>,
    x_sub: &DMatrix<f64>,
    pi0: f64,
    sigma2: f64,
    ridge_lambda: f64,
    delta_eff: f64,
) -> Result<RidgeEstimate> {
    if !(pi0 > 0.0 && pi0 < 1.0) {
        return Err(invalid("pi0", format!("must lie in (0, 1), got {pi0}")));
    }
    if !(ridge_lambda > 0.0) {
        return Err(invalid("ridge_lambda", format!("must be positive, got {ridge_lambda}")));
    }
    let beta = ridge_estimator(x_sub, y, ridge_lambda)?;
    let (v, _) = debias_roots(delta_eff, ridge_lambda);
    let tau = ridge_noise(v, delta_eff, ridge_lambda, sigma2, 1.0 - pi0)
        .ok_or_else(|| Error::Estimation(format!("no admissible ridge calibration at v={v}")))?;
    let u: Vec<f64> = beta.iter().map(|b| v * b).collect();
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Estimation("non-finite ridge coefficients".into()));
    }
    let top = 1.0 - pi0;
    let loglik = |p: f64| mixture_log_likelihood(&u, pi0, p, tau);
    let step = top / (PI1_GRID_POINTS - 1) as f64;
    let values: Vec<f64> = (0..PI1_GRID_POINTS).map(|i| loglik(i as f64 * step)).collect();
    let best = (0..PI1_GRID_POINTS)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("nonempty grid");
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1).min(PI1_GRID_POINTS - 1)) as f64 * step;
    let pi1 = golden_max(loglik, lo, hi, 1e-10);
    let pi1 = if loglik(pi1) >= values[best] { pi1 } else { best as f64 * step };
    Ok(RidgeEstimate { pi1, v, tau })
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
