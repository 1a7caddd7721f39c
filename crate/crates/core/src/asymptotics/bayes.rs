//! Effective noise of the Bayes-optimal channel and the limiting FDP/TPP of
//! truncating local fdrs.

use crate::channel::{self, ScalarChannel};
use crate::error::{invalid, Error, Result};
use crate::prior::DiscretePrior;
use serde::Serialize;

/// Points of the log-spaced `tau^2` grid scanned before refinement.
pub const POTENTIAL_GRID_POINTS: usize = 241;
/// Points of the threshold grid used by the limiting-curve searches.
pub const THRESHOLD_GRID_POINTS: usize = 2001;
const BRACKET_TOLERANCE: f64 = 1e-10;
const COMPETING_MINIMUM_GAP: f64 = 1e-6;

/// Solved fixed point of the potential together with its inputs.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelCalibration {
    pub prior: DiscretePrior,
    pub delta: f64,
    pub sigma2: f64,
    pub tau_star: f64,
    pub potential_at_min: f64,
    /// `tau^2` of other grid local minima whose potential is within 1e-6 of the global one.
    pub competing_minima: Vec<f64>,
}

impl ChannelCalibration {
    pub fn tau2(&self) -> f64 {
        self.tau_star * self.tau_star
    }

    pub fn channel(&self) -> ScalarChannel<'_> {
        ScalarChannel::new(&self.prior, self.tau_star).expect("tau_star > 0")
    }

    /// `tau^2 - sigma^2 - R(tau)/delta` at the solution.
    pub fn residual(&self) -> f64 {
        fixed_point_residual(&self.prior, self.delta, self.sigma2, self.tau2())
    }
}

fn check_model(delta: f64, sigma2: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    Ok(())
}

/// `phi(tau^2) = delta sigma^2 / (2 tau^2) - (delta/2) log(delta sigma^2 / tau^2) + MI(prior, tau^2)`.
pub fn potential(tau2: f64, prior: &DiscretePrior, delta: f64, sigma2: f64) -> Result<f64> {
    check_model(delta, sigma2)?;
    let mi = channel::mutual_information(prior, tau2)?;
    Ok(delta * sigma2 / (2.0 * tau2) - 0.5 * delta * (delta * sigma2 / tau2).ln() + mi)
}

/// `tau^2 - sigma^2 - R(tau)/delta`; zero exactly at stationary points of the potential.
pub fn fixed_point_residual(prior: &DiscretePrior, delta: f64, sigma2: f64, tau2: f64) -> f64 {
    let ch = ScalarChannel::new(prior, tau2.sqrt()).expect("positive tau");
    tau2 - sigma2 - channel::bayes_risk(&ch) / delta
}

/// Global minimizer of the potential over `tau^2 >= sigma^2`.
///
/// The minimizer lies in `[sigma^2, sigma^2 + E[beta0^2]/delta]`. That interval
/// (plus a margin) is scanned on a log grid, the best cell is narrowed by
/// golden-section search and the stationarity equation is then solved inside
/// the final bracket.
pub fn solve_tau_star(prior: &DiscretePrior, delta: f64, sigma2: f64) -> Result<ChannelCalibration> {
    check_model(delta, sigma2)?;
    let phi = |t2: f64| potential(t2, prior, delta, sigma2).expect("validated inputs");
    let lo = sigma2;
    let hi = sigma2 + 1.1 * prior.second_moment() / delta + 1e-12 * sigma2;
    let n = POTENTIAL_GRID_POINTS;
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
    let values: Vec<f64> = grid.iter().map(|&t2| phi(t2)).collect();
    let best = (0..n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty grid");

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n - 1)];
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    let mut iterations = 0;
    while b - a > BRACKET_TOLERANCE * b && iterations < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = phi(d);
        }
        iterations += 1;
    }
    if b - a > BRACKET_TOLERANCE * b {
        return Err(Error::NonConvergence {
            what: "potential minimization",
            iterations,
            residual: b - a,
        });
    }
    let estimate = 0.5 * (a + b);
    let tau2 = polish_stationary_point(prior, delta, sigma2, estimate, grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)]);
    let potential_at_min = phi(tau2);

    let competing_minima = (1..n - 1)
        .filter(|&i| values[i] <= values[i - 1] && values[i] <= values[i + 1])
        .filter(|&i| (i as isize - best as isize).abs() > 1)
        .filter(|&i| values[i] - potential_at_min <= COMPETING_MINIMUM_GAP)
        .map(|i| grid[i])
        .collect();

    Ok(ChannelCalibration {
        prior: prior.clone(),
        delta,
        sigma2,
        tau_star: tau2.sqrt(),
        potential_at_min,
        competing_minima,
    })
}

/// Bisection on the stationarity residual, which changes sign from negative
/// to positive across a minimum of the potential.
fn polish_stationary_point(prior: &DiscretePrior, delta: f64, sigma2: f64, estimate: f64, lo: f64, hi: f64) -> f64 {
    let g = |t2: f64| fixed_point_residual(prior, delta, sigma2, t2);
    let (mut a, mut b) = (lo.max(sigma2), hi);
    if g(a) > 0.0 || g(b) < 0.0 {
        return estimate;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    if g(a).abs() <= g(b).abs() {
        a
    } else {
        b
    }
}

/// Limiting `(fdp, tpp)` of rejecting `{local_fdr < t}` on the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub fdp: f64,
    pub tpp: f64,
}

/// Probabilities of the event `{local_fdr(beta0 + tau Z) < t}`.
#[derive(Debug, Clone, Copy)]
struct EventMass {
    /// `P(beta0 = 0, event)`.
    null: f64,
    /// `P(beta0 != 0, event)`.
    nonnull: f64,
}

fn event_mass(ch: &ScalarChannel<'_>, t: f64) -> EventMass {
    let region = ch.low_fdr_region(t);
    let mut mass = EventMass { null: 0.0, nonnull: 0.0 };
    for a in ch.prior().atoms() {
        let p = a.weight * region.probability(a.location, ch.tau());
        if a.location == 0.0 {
            mass.null += p;
        } else {
            mass.nonnull += p;
        }
    }
    mass
}

/// Limiting FDP `P(beta0 = 0 | Phi < t)`, zero when the event is empty.
pub fn limit_fdp(ch: &ScalarChannel<'_>, t: f64) -> f64 {
    let m = event_mass(ch, t);
    let total = m.null + m.nonnull;
    if total > 0.0 {
        (m.null / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn limit_point(ch: &ScalarChannel<'_>, t: f64) -> CurvePoint {
    let m = event_mass(ch, t);
    let total = m.null + m.nonnull;
    let nonnull_weight = ch.prior().nonnull_weight();
    CurvePoint {
        t,
        fdp: if total > 0.0 { (m.null / total).clamp(0.0, 1.0) } else { 0.0 },
        tpp: if nonnull_weight > 0.0 {
            (m.nonnull / nonnull_weight).clamp(0.0, 1.0)
        } else {
            0.0
        },
    }
}

/// Limiting FDP/TPP of the local-fdr truncation procedure over a threshold grid.
pub fn tpop_limit_curve(cal: &ChannelCalibration, t_grid: &[f64]) -> Vec<CurvePoint> {
    let ch = cal.channel();
    t_grid.iter().map(|&t| limit_point(&ch, t)).collect()
}

fn uniform_grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| i as f64 / (points - 1) as f64)
}

/// Limiting threshold of the cumulative procedure at penalty `lambda`:
/// the grid maximizer of `P(Phi<t) - (1 + lambda (1-pi0)/P(Phi<t)) E[Phi 1{Phi<t}]`.
///
/// `E[Phi 1{Phi<t}] = P(beta0 = 0, Phi < t)` because the event is a function of
/// the observation. Ties resolve to the largest threshold.
pub fn cpop_threshold_limit(cal: &ChannelCalibration, lambda: f64) -> f64 {
    cpop_threshold_on_grid(&cal.channel(), lambda, THRESHOLD_GRID_POINTS)
}

pub fn cpop_threshold_on_grid(ch: &ScalarChannel<'_>, lambda: f64, points: usize) -> f64 {
    let nonnull_weight = ch.prior().nonnull_weight();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for t in uniform_grid(points) {
        let m = event_mass(ch, t);
        let reject = m.null + m.nonnull;
        let objective = if reject > 0.0 {
            reject - (1.0 + lambda * nonnull_weight / reject) * m.null
        } else {
            0.0
        };
        if objective >= best.0 {
            best = (objective, t);
        }
    }
    best.1
}

/// `max { s in [0,1] : limit_fdp(s) <= target }`.
pub fn tpop_threshold_for_alpha(cal: &ChannelCalibration, target: f64) -> f64 {
    fdr_threshold(&cal.channel(), target, THRESHOLD_GRID_POINTS)
}

/// Threshold search used by both the known-prior and estimated-prior procedures:
/// a grid scan of the limiting FDP followed by bisection to 1e-8.
pub fn fdr_threshold(ch: &ScalarChannel<'_>, target: f64, points: usize) -> f64 {
    let grid: Vec<f64> = uniform_grid(points).collect();
    let fdp: Vec<f64> = grid.iter().map(|&s| limit_fdp(ch, s)).collect();
    if fdp.iter().all(|&f| f <= target) {
        return 1.0;
    }
    let monotone = fdp.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let last_feasible = (0..points).rev().find(|&i| fdp[i] <= target);
    let Some(i) = last_feasible else {
        return 0.0;
    };
    if !monotone || i + 1 >= points {
        return grid[i];
    }
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if limit_fdp(ch, mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
