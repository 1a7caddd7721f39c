//! LASSO by cyclic coordinate descent, and selection by thresholding its estimate.

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, column, dot};
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// `sign(x) (|x| - theta)_+`.
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub beta_hat: DVector<f64>,
    pub lambda: f64,
    /// Full coordinate sweeps performed.
    pub iterations: usize,
    /// Largest violation of the optimality conditions at the returned point.
    pub kkt_residual: f64,
    pub converged: bool,
}

/// Minimizes `0.5 |Y - X beta|^2 + lambda |beta|_1`, stopping once a full sweep
/// moves no coordinate by more than `tol`.
pub fn lasso_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, tol: f64, max_iters: usize) -> Result<LassoFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("Y has {} rows, X has {n}", y.len())));
    }
    let norms: Vec<f64> = (0..d).map(|j| dot(column(x, j), column(x, j))).collect();
    let mut beta = DVector::zeros(d);
    let mut resid = y.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let mut largest = 0.0f64;
        for j in 0..d {
            if norms[j] == 0.0 {
                continue;
            }
            let xj = column(x, j);
            let old = beta[j];
            let rho = dot(xj, resid.as_slice()) + norms[j] * old;
            let new = soft_threshold(rho, lambda) / norms[j];
            if new != old {
                axpy(old - new, xj, resid.as_mut_slice());
                beta[j] = new;
                largest = largest.max((new - old).abs());
            }
        }
        iterations += 1;
        if largest < tol {
            converged = true;
            break;
        }
    }
    let kkt_residual = kkt_violation(x, &resid, &beta, lambda);
    Ok(LassoFit {
        beta_hat: beta,
        lambda,
        iterations,
        kkt_residual,
        converged,
    })
}

fn kkt_violation(x: &DMatrix<f64>, resid: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    (0..x.ncols())
        .map(|j| {
            let g = dot(column(x, j), resid.as_slice());
            if beta[j] == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `{j : |beta_hat_j| > t}`.
pub fn thresholded_lasso_select(fit: &LassoFit, t: f64) -> Vec<usize> {
    (0..fit.beta_hat.len()).filter(|&j| fit.beta_hat[j].abs() > t).collect()
}
