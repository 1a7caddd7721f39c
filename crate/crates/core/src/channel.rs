//! Exact Bayes calculus for the scalar Gaussian channel `Y = beta0 + tau * Z`
//! with `beta0` drawn from a [`DiscretePrior`].
//!
//! All likelihood weights are accumulated in log space with the maximum
//! subtracted, so evaluations stay finite for `|y|` many multiples of `tau`.

use crate::error::{invalid, Result};
use crate::normal;
use crate::prior::DiscretePrior;
use crate::quadrature::NormalRule;

/// Number of points of the z-grid used for the null local-fdr CDF of
/// asymmetric priors.
/// Atoms whose likelihood weights are kept on the stack in [`ScalarChannel::moments`].
const MOMENT_CACHE: usize = 8;

pub const PSI_GRID_POINTS: usize = 4001;
/// Half-width of that grid.
pub const PSI_GRID_HALF_WIDTH: f64 = 8.0;

#[derive(Debug, Clone, Copy)]
pub struct ScalarChannel<'a> {
    prior: &'a DiscretePrior,
    tau: f64,
}

/// Posterior summaries at a single observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub null_prob: f64,
    pub mean: f64,
    pub variance: f64,
}

impl<'a> ScalarChannel<'a> {
    pub fn new(prior: &'a DiscretePrior, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("tau", format!("must be positive and finite, got {tau}")));
        }
        Ok(Self { prior, tau })
    }

    pub fn prior(&self) -> &'a DiscretePrior {
        self.prior
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    fn log_likelihood_weight(&self, y: f64, i: usize) -> f64 {
        let d = y - self.prior.atoms()[i].location;
        self.prior.log_weights()[i] - d * d / (2.0 * self.tau * self.tau)
    }

    #[inline]
    fn max_log_weight(&self, y: f64) -> f64 {
        (0..self.prior.atoms().len())
            .map(|i| self.log_likelihood_weight(y, i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Null probability, mean and variance of `beta0` given `Y = y`.
    pub fn moments(&self, y: f64) -> PosteriorMoments {
        let atoms = self.prior.atoms();
        let shift = self.max_log_weight(y);
        let mut cache = [0.0; MOMENT_CACHE];
        let weight = |i: usize, cache: &[f64]| {
            if i < MOMENT_CACHE {
                cache[i]
            } else {
                (self.log_likelihood_weight(y, i) - shift).exp()
            }
        };
        let (mut s0, mut s1) = (0.0, 0.0);
        for (i, a) in atoms.iter().enumerate() {
            let e = (self.log_likelihood_weight(y, i) - shift).exp();
            if i < MOMENT_CACHE {
                cache[i] = e;
            }
            s0 += e;
            s1 += e * a.location;
        }
        let mean = s1 / s0;
        let mut s2 = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            s2 += weight(i, &cache) * (a.location - mean).powi(2);
        }
        PosteriorMoments {
            null_prob: (weight(self.prior.null_index(), &cache) / s0).clamp(0.0, 1.0),
            mean,
            variance: (s2 / s0).max(0.0),
        }
    }

    /// `E[beta0 | beta0 + tau Z = y]`.
    pub fn posterior_mean(&self, y: f64) -> f64 {
        let atoms = self.prior.atoms();
        let shift = self.max_log_weight(y);
        let (mut s0, mut s1) = (0.0, 0.0);
        for (i, a) in atoms.iter().enumerate() {
            let e = (self.log_likelihood_weight(y, i) - shift).exp();
            s0 += e;
            s1 += e * a.location;
        }
        s1 / s0
    }

    /// Local fdr `P(beta0 = 0 | beta0 + tau Z = y)`.
    pub fn local_fdr(&self, y: f64) -> f64 {
        let shift = self.max_log_weight(y);
        let mut s0 = 0.0;
        let mut null = 0.0;
        for i in 0..self.prior.atoms().len() {
            let e = (self.log_likelihood_weight(y, i) - shift).exp();
            s0 += e;
            if i == self.prior.null_index() {
                null = e;
            }
        }
        (null / s0).clamp(0.0, 1.0)
    }

    /// `Var(beta0 | Y = y)`; the derivative of the posterior mean is this over `tau^2`.
    pub fn posterior_variance(&self, y: f64) -> f64 {
        self.moments(y).variance
    }

    /// `log S(y)` where `local_fdr(y) = 1 / (1 + S(y))`; convex in `y`.
    /// `-inf` for the pure-null prior.
    pub fn log_nonnull_odds(&self, y: f64) -> f64 {
        let tau2 = self.tau * self.tau;
        let log_pi0 = self.prior.log_weights()[self.prior.null_index()];
        let terms = self
            .prior
            .atoms()
            .iter()
            .zip(self.prior.log_weights())
            .enumerate()
            .filter(|(i, _)| *i != self.prior.null_index())
            .map(move |(_, (a, lw))| lw - log_pi0 + (y * a.location - 0.5 * a.location * a.location) / tau2);
        normal::log_sum_exp(terms)
    }

    fn log_nonnull_odds_slope(&self, y: f64) -> f64 {
        let tau2 = self.tau * self.tau;
        let log_pi0 = self.prior.log_weights()[self.prior.null_index()];
        let terms: Vec<(f64, f64)> = self
            .prior
            .nonnull_atoms()
            .zip(
                self.prior
                    .log_weights()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != self.prior.null_index())
                    .map(|(_, lw)| *lw),
            )
            .map(|(a, lw)| {
                (
                    lw - log_pi0 + (y * a.location - 0.5 * a.location * a.location) / tau2,
                    a.location / tau2,
                )
            })
            .collect();
        let m = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let (num, den) = terms.iter().fold((0.0, 0.0), |(n, d), &(l, s)| {
            let e = (l - m).exp();
            (n + e * s, d + e)
        });
        num / den
    }

    /// Location of the maximum of the local fdr; `None` when it is monotone.
    pub fn local_fdr_mode(&self) -> Option<f64> {
        let has_pos = self.prior.nonnull_atoms().any(|a| a.location > 0.0);
        let has_neg = self.prior.nonnull_atoms().any(|a| a.location < 0.0);
        if !(has_pos && has_neg) {
            return None;
        }
        if self.prior.is_symmetric() {
            return Some(0.0);
        }
        let scale = self.tau.max(self.prior.max_abs_location());
        Some(increasing_root(|y| self.log_nonnull_odds_slope(y), 0.0, scale))
    }

    /// Supremum of the local fdr over `y`.
    pub fn max_local_fdr(&self) -> f64 {
        if self.prior.is_point_null() {
            return 1.0;
        }
        match self.local_fdr_mode() {
            Some(mode) => self.local_fdr(mode),
            None => 1.0,
        }
    }

    /// The set `{y : local_fdr(y) < t}`.
    ///
    /// The local fdr is quasi-concave in `y` for any discrete prior, so the
    /// set is the union of at most two half-lines.
    pub fn low_fdr_region(&self, t: f64) -> LowFdrRegion {
        if t <= 0.0 || self.prior.is_point_null() {
            return LowFdrRegion::EMPTY;
        }
        if t >= 1.0 {
            return LowFdrRegion::WHOLE;
        }
        let level = ((1.0 - t) / t).ln();
        let has_pos = self.prior.nonnull_atoms().any(|a| a.location > 0.0);
        let has_neg = self.prior.nonnull_atoms().any(|a| a.location < 0.0);
        let f = |y: f64| self.log_nonnull_odds(y) - level;
        let scale = self.tau.max(self.prior.max_abs_location()).max(1e-300);
        match (has_neg, has_pos) {
            (true, true) => {
                let mode = self.local_fdr_mode().expect("atoms on both sides");
                if f(mode) > 0.0 {
                    return LowFdrRegion::WHOLE;
                }
                let lower = increasing_root(|y| -f(y), mode - scale, scale).min(mode);
                let upper = increasing_root(f, mode + scale, scale).max(mode);
                LowFdrRegion { lower, upper }
            }
            (false, true) => LowFdrRegion {
                lower: f64::NEG_INFINITY,
                upper: increasing_root(f, 0.0, scale),
            },
            (true, false) => LowFdrRegion {
                lower: increasing_root(|y| -f(y), 0.0, scale),
                upper: f64::INFINITY,
            },
            (false, false) => LowFdrRegion::EMPTY,
        }
    }
}

/// `{y < lower} ∪ {y > upper}`; `lower = upper = +inf` encodes the whole line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowFdrRegion {
    pub lower: f64,
    pub upper: f64,
}

impl LowFdrRegion {
    pub const EMPTY: Self = Self {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const WHOLE: Self = Self {
        lower: f64::INFINITY,
        upper: f64::INFINITY,
    };

    /// `P(mean + tau Z ∈ region)`.
    pub fn probability(&self, mean: f64, tau: f64) -> f64 {
        if self.lower == f64::INFINITY {
            return 1.0;
        }
        let lo = if self.lower == f64::NEG_INFINITY {
            0.0
        } else {
            normal::cdf((self.lower - mean) / tau)
        };
        let hi = if self.upper == f64::INFINITY {
            0.0
        } else {
            normal::sf((self.upper - mean) / tau)
        };
        (lo + hi).clamp(0.0, 1.0)
    }

    pub fn contains(&self, y: f64) -> bool {
        y < self.lower || y > self.upper
    }
}

/// Root of a nondecreasing function, expanding a bracket outward from `start`.
fn increasing_root(f: impl Fn(f64) -> f64, start: f64, scale: f64) -> f64 {
    let mut step = scale;
    let (mut lo, mut hi);
    if f(start) > 0.0 {
        hi = start;
        lo = start - step;
        while f(lo) > 0.0 {
            hi = lo;
            step *= 2.0;
            lo = start - step;
            if !lo.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
    } else {
        lo = start;
        hi = start + step;
        while f(hi) <= 0.0 {
            lo = hi;
            step *= 2.0;
            hi = start + step;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bayes risk `E[(beta0 - E[beta0 | beta0 + tau Z])^2]` with the default rule.
pub fn bayes_risk(ch: &ScalarChannel<'_>) -> f64 {
    bayes_risk_with(ch, NormalRule::standard())
}

pub fn bayes_risk_with(ch: &ScalarChannel<'_>, rule: &NormalRule) -> f64 {
    ch.prior()
        .atoms()
        .iter()
        .map(|a| {
            a.weight
                * rule.expect(|z| {
                    let err = a.location - ch.posterior_mean(a.location + ch.tau() * z);
                    err * err
                })
        })
        .sum::<f64>()
        .max(0.0)
}

/// Mutual information between `beta0` and `Y` at noise variance `tau2`, in nats.
pub fn mutual_information(prior: &DiscretePrior, tau2: f64) -> Result<f64> {
    mutual_information_with(prior, tau2, NormalRule::standard())
}

pub fn mutual_information_with(prior: &DiscretePrior, tau2: f64, rule: &NormalRule) -> Result<f64> {
    if !(tau2 > 0.0) {
        return Err(invalid("tau2", format!("must be positive, got {tau2}")));
    }
    if tau2.is_infinite() {
        return Ok(0.0);
    }
    let tau = tau2.sqrt();
    let atoms = prior.atoms();
    let log_w = prior.log_weights();
    let evidence: f64 = atoms
        .iter()
        .map(|a0| {
            a0.weight
                * rule.expect(|z| {
                    let y = a0.location + tau * z;
                    normal::log_sum_exp(
                        atoms
                            .iter()
                            .zip(log_w)
                            .map(|(a, lw)| lw - (y - a.location).powi(2) / (2.0 * tau2)),
                    )
                })
        })
        .sum();
    Ok((-0.5 - evidence).max(0.0))
}

/// The CDF `Psi(t) = P(local_fdr(tau Z) <= t)` of the null local fdr.
#[derive(Debug, Clone)]
pub enum NullFdrCdf {
    /// Inversion through the exact low-fdr region.
    Exact {
        prior: DiscretePrior,
        tau: f64,
        max_fdr: f64,
    },
    /// Sorted local fdr values on a trapezoidal z-grid with cumulative weights.
    Grid { values: Vec<f64>, cumulative: Vec<f64> },
}

impl NullFdrCdf {
    /// Exact inversion for symmetric priors, the default z-grid otherwise.
    pub fn new(ch: &ScalarChannel<'_>) -> Self {
        if ch.prior().is_symmetric() {
            Self::exact(ch)
        } else {
            Self::grid(ch, PSI_GRID_POINTS, PSI_GRID_HALF_WIDTH)
        }
    }

    pub fn exact(ch: &ScalarChannel<'_>) -> Self {
        Self::Exact {
            prior: ch.prior().clone(),
            tau: ch.tau(),
            max_fdr: ch.max_local_fdr(),
        }
    }

    pub fn grid(ch: &ScalarChannel<'_>, points: usize, half_width: f64) -> Self {
        assert!(points >= 2);
        let h = 2.0 * half_width / (points - 1) as f64;
        let mut pairs: Vec<(f64, f64)> = (0..points)
            .map(|i| {
                let z = -half_width + i as f64 * h;
                let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
                (ch.local_fdr(ch.tau() * z), end * h * normal::pdf(z))
            })
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let (values, cumulative) = pairs
            .into_iter()
            .map(|(v, w)| {
                acc += w / total;
                (v, acc)
            })
            .unzip();
        Self::Grid { values, cumulative }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exact { prior, tau, max_fdr } => {
                // Above the largest attainable local fdr the event is sure.
                if t >= max_fdr - 1e-14 {
                    return 1.0;
                }
                let ch = ScalarChannel { prior, tau: *tau };
                ch.low_fdr_region(t).probability(0.0, *tau)
            }
            Self::Grid { values, cumulative } => {
                let k = values.partition_point(|&v| v <= t);
                if k == 0 {
                    0.0
                } else {
                    cumulative[k - 1].min(1.0)
                }
            }
        }
    }
}

/// `Psi(t)` for a single threshold.
pub fn null_fdr_cdf(t: f64, ch: &ScalarChannel<'_>) -> f64 {
    NullFdrCdf::new(ch).eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn three_point() -> DiscretePrior {
        "0:0.6,1:0.2,-1:0.2".parse().unwrap()
    }

    /// Bayes rule written out with plain densities.
    fn direct(prior: &DiscretePrior, tau: f64, y: f64) -> (f64, f64, f64) {
        let lik: Vec<f64> = prior
            .atoms()
            .iter()
            .map(|a| a.weight * (-(y - a.location).powi(2) / (2.0 * tau * tau)).exp())
            .collect();
        let z: f64 = lik.iter().sum();
        let mean = prior.atoms().iter().zip(&lik).map(|(a, l)| a.location * l).sum::<f64>() / z;
        let second = prior.atoms().iter().zip(&lik).map(|(a, l)| a.location.powi(2) * l).sum::<f64>() / z;
        let null = prior.atoms().iter().zip(&lik).find(|(a, _)| a.location == 0.0).unwrap().1 / z;
        (mean, null, second)
    }

    #[test]
    fn posterior_mean_examples() {
        let p = three_point();
        let ch = ScalarChannel::new(&p, 0.5).unwrap();
        assert!(ch.posterior_mean(0.0).abs() < 1e-16);
        let e8 = (-8.0f64).exp();
        let expected = (0.2 - 0.2 * e8) / (0.6 * (-2.0f64).exp() + 0.2 + 0.2 * e8);
        assert!((ch.posterior_mean(1.0) - expected).abs() < 1e-14);
        assert!((expected - 0.7108).abs() < 1e-4);
        let null = DiscretePrior::point_null();
        let ch0 = ScalarChannel::new(&null, 0.3).unwrap();
        for y in [-4.0, 0.0, 2.5] {
            assert_eq!(ch0.posterior_mean(y), 0.0);
            assert_eq!(ch0.local_fdr(y), 1.0);
            assert_eq!(ch0.posterior_variance(y), 0.0);
        }
    }

    #[test]
    fn local_fdr_examples() {
        let p = three_point();
        let ch = ScalarChannel::new(&p, 0.5).unwrap();
        let expected = 0.6 / (0.6 + 0.4 * (-2.0f64).exp());
        assert!((ch.local_fdr(0.0) - expected).abs() < 1e-15);
        assert!((expected - 0.91725).abs() < 1e-5);
        let sharp = ScalarChannel::new(&p, 1e-3).unwrap();
        assert!(sharp.local_fdr(1.0) < 1e-100);
    }

    #[test]
    fn posterior_variance_examples() {
        let p = three_point();
        let ch = ScalarChannel::new(&p, 0.5).unwrap();
        let (mean, _, second) = direct(&p, 0.5, 1.0);
        assert!((ch.posterior_variance(1.0) - (second - mean * mean)).abs() < 1e-14);
    }

    #[test]
    fn symmetric_two_atom_variance_is_one_at_origin() {
        // A vanishing null atom leaves the posterior on +-1 at y = 0.
        let p = DiscretePrior::new([(-1.0, 0.5), (0.0, 1e-300), (1.0, 0.5)]).unwrap();
        for tau in [0.1, 0.7, 3.0] {
            let ch = ScalarChannel::new(&p, tau).unwrap();
            let v = ch.posterior_variance(0.0);
            assert!((v - 1.0).abs() < 1e-9, "tau={tau} v={v}");
        }
    }

    #[test]
    fn matches_direct_bayes_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let k = rng.random_range(1..5usize);
            let mut atoms = vec![(0.0, rng.random_range(0.05..1.0))];
            for i in 0..k {
                let loc = (i as f64 + 1.0) * rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                atoms.push((loc, rng.random_range(0.05..1.0)));
            }
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            let Ok(prior) = DiscretePrior::new(atoms.iter().map(|&(l, w)| (l, w / total))) else { continue };
            let tau = rng.random_range(0.2..2.0);
            let y = rng.random_range(-10.0..10.0) * tau;
            let ch = ScalarChannel::new(&prior, tau).unwrap();
            let (mean, null, _) = direct(&prior, tau, y);
            let scale: f64 = prior.atoms().iter().map(|a| a.location.abs()).fold(0.0, f64::max);
            assert!((ch.posterior_mean(y) - mean).abs() <= 1e-12 * scale.max(mean.abs()));
            assert!((ch.local_fdr(y) - null).abs() <= 1e-12 * null);
        }
    }

    #[test]
    fn variance_is_tweedie_derivative_of_mean() {
        let p: DiscretePrior = "0:0.4,1:0.5,-1:0.1".parse().unwrap();
        let tau = 0.6;
        let ch = ScalarChannel::new(&p, tau).unwrap();
        let h = 1e-5;
        for i in -20..=20 {
            let y = i as f64 * 0.25;
            let fd = (ch.posterior_mean(y + h) - ch.posterior_mean(y - h)) / (2.0 * h);
            assert!((fd * tau * tau - ch.posterior_variance(y)).abs() < 1e-6);
        }
    }

    #[test]
    fn local_fdr_even_for_symmetric_prior() {
        let p = three_point();
        let ch = ScalarChannel::new(&p, 0.37).unwrap();
        for i in 0..100 {
            let y = i as f64 * 0.05;
            assert!((ch.local_fdr(y) - ch.local_fdr(-y)).abs() <= 1e-15 * ch.local_fdr(y));
        }
    }

    #[test]
    fn bayes_risk_limits_and_monotonicity() {
        let null = DiscretePrior::point_null();
        assert_eq!(bayes_risk(&ScalarChannel::new(&null, 0.5).unwrap()), 0.0);
        let p = three_point();
        assert!(bayes_risk(&ScalarChannel::new(&p, 1e-3).unwrap()) < 1e-12);
        let mut prev = f64::INFINITY;
        for i in (1..=60).rev() {
            let r = bayes_risk(&ScalarChannel::new(&p, i as f64 * 0.05).unwrap());
            assert!(r <= prev + 1e-12);
            prev = r;
        }
    }

    #[test]
    fn bayes_risk_matches_monte_carlo() {
        let p = three_point();
        let tau = 0.5;
        let ch = ScalarChannel::new(&p, tau).unwrap();
        let exact = bayes_risk(&ch);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let u: f64 = rng.random();
            let b = if u < 0.6 { 0.0 } else if u < 0.8 { 1.0 } else { -1.0 };
            let z: f64 = rng.sample(StandardNormal);
            let e = (b - ch.posterior_mean(b + tau * z)).powi(2);
            s += e;
            s2 += e * e;
        }
        let mean = s / m as f64;
        let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mc={mean} quad={exact} se={se}");
    }

    #[test]
    fn mutual_information_limits_and_monte_carlo() {
        let null = DiscretePrior::point_null();
        assert!(mutual_information(&null, 0.3).unwrap().abs() < 1e-14);
        let p = three_point();
        assert!(mutual_information(&p, 1e8).unwrap() < 1e-8);
        assert!(mutual_information(&p, 0.0).is_err());
        let tau2 = 0.25;
        let exact = mutual_information(&p, tau2).unwrap();
        // MI = E[log p(Y|b) - log p(Y)]
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        let tau = tau2.sqrt();
        for _ in 0..m {
            let u: f64 = rng.random();
            let b = if u < 0.6 { 0.0 } else if u < 0.8 { 1.0 } else { -1.0 };
            let z: f64 = rng.sample(StandardNormal);
            let y = b + tau * z;
            let marg: f64 = p.atoms().iter().map(|a| a.weight * (-(y - a.location).powi(2) / (2.0 * tau2)).exp()).sum();
            let v = -0.5 * z * z - marg.ln();
            s += v;
            s2 += v * v;
        }
        let mean = s / m as f64;
        let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mc={mean} quad={exact} se={se}");
        // bounded by the prior entropy
        let entropy = -(0.6f64 * 0.6f64.ln() + 0.4 * 0.2f64.ln());
        assert!(exact > 0.0 && exact < entropy);
    }

    #[test]
    fn null_cdf_bounds_and_sure_event() {
        let p = three_point();
        let ch = ScalarChannel::new(&p, 0.5).unwrap();
        let psi = NullFdrCdf::new(&ch);
        assert_eq!(psi.eval(1.0), 1.0);
        assert_eq!(psi.eval(0.0), 0.0);
        let top = ch.local_fdr(0.0);
        for i in 1..200 {
            let y = i as f64 * 0.02;
            assert!(ch.local_fdr(y) <= top);
        }
        assert!((psi.eval(top) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = psi.eval(i as f64 / 1000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn null_cdf_matches_monte_carlo_in_kolmogorov_distance() {
        for literal in ["0:0.6,1:0.2,-1:0.2", "0:0.4,1:0.5,-1:0.1"] {
            let p: DiscretePrior = literal.parse().unwrap();
            let tau = 0.45;
            let ch = ScalarChannel::new(&p, tau).unwrap();
            let psi = NullFdrCdf::new(&ch);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let m = 1_000_000usize;
            let mut draws: Vec<f64> = (0..m)
                .map(|_| ch.local_fdr(tau * rng.sample::<f64, _>(StandardNormal)))
                .collect();
            draws.sort_by(f64::total_cmp);
            let mut ks: f64 = 0.0;
            for (i, &v) in draws.iter().enumerate().step_by(97) {
                let f = psi.eval(v);
                ks = ks.max((f - (i + 1) as f64 / m as f64).abs()).max((f - i as f64 / m as f64).abs());
            }
            assert!(ks < 0.005, "{literal}: ks={ks}");
        }
    }

    #[test]
    fn grid_and_exact_cdf_agree_for_asymmetric_prior() {
        let p: DiscretePrior = "0:0.4,1:0.5,-1:0.1".parse().unwrap();
        let ch = ScalarChannel::new(&p, 0.3).unwrap();
        let exact = NullFdrCdf::exact(&ch);
        let grid = NullFdrCdf::new(&ch);
        assert!(matches!(grid, NullFdrCdf::Grid { .. }));
        for i in 0..=500 {
            let t = i as f64 / 500.0;
            assert!((exact.eval(t) - grid.eval(t)).abs() < 2e-3);
        }
    }

    #[test]
    fn low_fdr_region_is_exact_level_set() {
        for literal in ["0:0.6,1:0.2,-1:0.2", "0:0.4,1:0.5,-1:0.1", "0:0.7,2:0.3", "0:0.5,-0.5:0.5"] {
            let p: DiscretePrior = literal.parse().unwrap();
            let ch = ScalarChannel::new(&p, 0.4).unwrap();
            for &t in &[0.01, 0.2, 0.5, 0.8, 0.95] {
                let r = ch.low_fdr_region(t);
                for i in -400..=400 {
                    let y = i as f64 * 0.01;
                    let inside = ch.local_fdr(y) < t;
                    let near = (y - r.lower).abs() < 1e-9 || (y - r.upper).abs() < 1e-9;
                    assert!(near || inside == r.contains(y), "{literal} t={t} y={y} {r:?}");
                }
            }
        }
    }
}
