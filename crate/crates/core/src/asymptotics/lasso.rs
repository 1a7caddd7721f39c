//! State evolution of the LASSO and the limiting FDP/TPP of thresholding it.

use super::bayes::CurvePoint;
use crate::error::{invalid, Error, Result};
use crate::normal::{cdf, pdf, sf};
use crate::prior::DiscretePrior;
use serde::Serialize;

const BISECTION_STEPS: usize = 300;
const LAMBDA_SCAN_POINTS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct LassoCalibration {
    pub prior: DiscretePrior,
    pub delta: f64,
    pub sigma2: f64,
    pub lambda: f64,
    pub alpha_prime: f64,
    pub tau_prime: f64,
}

impl LassoCalibration {
    /// Soft-threshold level `alpha' tau'` of the effective scalar problem.
    pub fn threshold(&self) -> f64 {
        self.alpha_prime * self.tau_prime
    }

    /// Limiting per-coordinate squared error of the LASSO estimate.
    pub fn risk(&self) -> f64 {
        soft_threshold_risk(&self.prior, self.tau_prime, self.threshold())
    }

    /// Residual of `tau'^2 = sigma^2 + risk / delta`.
    pub fn tau_residual(&self) -> f64 {
        self.tau_prime.powi(2) - self.sigma2 - self.risk() / self.delta
    }

    /// Residual of the penalty equation.
    pub fn lambda_residual(&self) -> f64 {
        implied_lambda(&self.prior, self.delta, self.alpha_prime, self.tau_prime) - self.lambda
    }
}

/// `E(eta_theta(b + tau Z) - b)^2` for a single location `b`.
pub fn soft_threshold_mse(b: f64, tau: f64, theta: f64) -> f64 {
    let a = (theta - b) / tau;
    let c = (-theta - b) / tau;
    let upper = tau * tau * (sf(a) + a * pdf(a)) - 2.0 * tau * theta * pdf(a) + theta * theta * sf(a);
    let lower = tau * tau * (cdf(c) - c * pdf(c)) - 2.0 * tau * theta * pdf(c) + theta * theta * cdf(c);
    let middle = b * b * (cdf(a) - cdf(c)).max(0.0);
    upper + lower + middle
}

/// `P(|b + tau Z| > theta)`.
pub fn exceedance(b: f64, tau: f64, theta: f64) -> f64 {
    sf((theta - b) / tau) + cdf((-theta - b) / tau)
}

pub fn soft_threshold_risk(prior: &DiscretePrior, tau: f64, theta: f64) -> f64 {
    prior
        .atoms()
        .iter()
        .map(|a| a.weight * soft_threshold_mse(a.location, tau, theta))
        .sum()
}

fn implied_lambda(prior: &DiscretePrior, delta: f64, alpha: f64, tau: f64) -> f64 {
    let theta = alpha * tau;
    let active: f64 = prior
        .atoms()
        .iter()
        .map(|a| a.weight * exceedance(a.location, tau, theta))
        .sum();
    theta * (1.0 - active / delta)
}

/// `E eta(Z; alpha)^2` for a pure-noise input, the large-`tau` slope of the risk.
fn noise_gain(alpha: f64) -> f64 {
    2.0 * ((1.0 + alpha * alpha) * sf(alpha) - alpha * pdf(alpha))
}

/// Smallest threshold multiplier for which the noise fixed point is finite.
pub fn alpha_min(delta: f64) -> f64 {
    if delta > 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if noise_gain(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `tau'^2` solving `tau^2 = sigma^2 + risk(tau, alpha tau) / delta` at fixed `alpha`.
fn tau2_at_alpha(prior: &DiscretePrior, delta: f64, sigma2: f64, alpha: f64) -> Result<f64> {
    let h = |t2: f64| {
        let tau = t2.sqrt();
        sigma2 + soft_threshold_risk(prior, tau, alpha * tau) / delta - t2
    };
    let mut lo = sigma2;
    let mut hi = 2.0 * (sigma2 + prior.second_moment() / delta);
    let mut doublings = 0;
    while h(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 400 || !hi.is_finite() {
            return Err(Error::NonConvergence {
                what: "LASSO noise fixed point",
                iterations: doublings,
                residual: h(lo),
            });
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if h(lo).abs() <= h(hi).abs() { lo } else { hi })
}

fn check(delta: f64, sigma2: f64, lambda: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Solves the two-equation system for `(alpha', tau')` at penalty `lambda`.
///
/// The inner noise equation is solved by bisection at each `alpha`; the outer
/// search bisects on `alpha` until the implied penalty matches `lambda`.
pub fn lasso_state_evolution(prior: &DiscretePrior, delta: f64, sigma2: f64, lambda: f64) -> Result<LassoCalibration> {
    check(delta, sigma2, lambda)?;
    let eval = |alpha: f64| -> Result<(f64, f64)> {
        let tau = tau2_at_alpha(prior, delta, sigma2, alpha)?.sqrt();
        Ok((tau, implied_lambda(prior, delta, alpha, tau)))
    };
    let floor = alpha_min(delta);
    let mut lo = if delta > 1.0 { 0.0 } else { floor * (1.0 + 1e-9) + 1e-12 };
    let (tau_lo, lambda_lo) = eval(lo)?;
    let build = |alpha: f64, tau: f64| LassoCalibration {
        prior: prior.clone(),
        delta,
        sigma2,
        lambda,
        alpha_prime: alpha,
        tau_prime: tau,
    };
    if lambda_lo >= lambda {
        return Ok(build(lo, tau_lo));
    }
    let mut hi = lo.max(0.5);
    let mut hi_state = eval(hi)?;
    let mut expansions = 0;
    while hi_state.1 < lambda {
        lo = hi;
        hi *= 2.0;
        hi_state = eval(hi)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonConvergence {
                what: "LASSO penalty bracket",
                iterations: expansions,
                residual: hi_state.1 - lambda,
            });
        }
    }
    let mut lo_state = eval(lo)?;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let state = eval(mid)?;
        if state.1 < lambda {
            lo = mid;
            lo_state = state;
        } else {
            hi = mid;
            hi_state = state;
        }
    }
    let cal = if (lo_state.1 - lambda).abs() <= (hi_state.1 - lambda).abs() {
        build(lo, lo_state.0)
    } else {
        build(hi, hi_state.0)
    };
    let residual = cal.lambda_residual().abs().max(cal.tau_residual().abs());
    if residual > 1e-8 * (1.0 + cal.tau_prime.powi(2)) {
        return Err(Error::NonConvergence {
            what: "LASSO state evolution",
            iterations: BISECTION_STEPS,
            residual,
        });
    }
    Ok(cal)
}

/// Predicted LASSO risk at penalty `lambda`.
pub fn lasso_risk(prior: &DiscretePrior, delta: f64, sigma2: f64, lambda: f64) -> Result<f64> {
    Ok(lasso_state_evolution(prior, delta, sigma2, lambda)?.risk())
}

/// Penalty above which the LASSO estimate is identically zero in the limit.
pub fn lambda_max(prior: &DiscretePrior, delta: f64, sigma2: f64) -> f64 {
    prior.max_abs_location() + 8.0 * (sigma2 + prior.second_moment() / delta).sqrt()
}

/// Risk-minimizing penalty over `(0, lambda_max]`: a uniform scan locates the
/// basin and golden-section search refines it.
pub fn lasso_optimal_lambda(prior: &DiscretePrior, delta: f64, sigma2: f64) -> Result<f64> {
    check(delta, sigma2, 0.0)?;
    let top = lambda_max(prior, delta, sigma2);
    let risk = |l: f64| lasso_risk(prior, delta, sigma2, l);
    let grid: Vec<f64> = (1..=LAMBDA_SCAN_POINTS)
        .map(|i| top * i as f64 / LAMBDA_SCAN_POINTS as f64)
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for &l in &grid {
        values.push(risk(l)?);
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty");
    let mut a = if best == 0 { top * 1e-6 } else { grid[best - 1] };
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (risk(c)?, risk(d)?);
    while b - a > 1e-10 * top {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = risk(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = risk(d)?;
        }
    }
    let star = 0.5 * (a + b);
    Ok(if risk(star)? <= values[best] { star } else { grid[best] })
}

/// Limiting FDP/TPP of rejecting `|eta_{alpha' tau'}(beta0 + tau' Z)| > t`.
pub fn lasso_limit_curve(cal: &LassoCalibration, t_grid: &[f64]) -> Vec<CurvePoint> {
    let nonnull = cal.prior.nonnull_weight();
    t_grid
        .iter()
        .map(|&t| {
            let level = cal.threshold() + t;
            let (mut null, mut hit) = (0.0, 0.0);
            for a in cal.prior.atoms() {
                let p = a.weight * exceedance(a.location, cal.tau_prime, level);
                if a.location == 0.0 {
                    null += p;
                } else {
                    hit += p;
                }
            }
            let total = null + hit;
            CurvePoint {
                t,
                fdp: if total > 0.0 { (null / total).clamp(0.0, 1.0) } else { 0.0 },
                tpp: if nonnull > 0.0 { (hit / nonnull).clamp(0.0, 1.0) } else { 0.0 },
            }
        })
        .collect()
}
