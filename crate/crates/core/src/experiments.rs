//! Simulation drivers behind the command-line runner: empirical FDP/TPP
//! trade-off curves, procedure sweeps over target levels, and Wasserstein
//! distances between finite-sample statistics and their scalar-channel limits.

use crate::amp::{amp_fit, AmpOptions};
use crate::asymptotics::{
    lasso_limit_curve, lasso_optimal_lambda, lasso_state_evolution, limit_point, solve_tau_star,
};
use crate::channel::NullFdrCdf;
use crate::datagen::{derive_seed, label, sample_instance, sample_prior, stream};
use crate::error::{invalid, Result};
use crate::lasso::{lasso_fit, thresholded_lasso_select, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::metrics::{fdp_tpp, wasserstein1};
use crate::prior::DiscretePrior;
use crate::procedures::{crt_pvalues, select, BlockThreshold, Method, ProcedureConfig};
use crate::select::tpop;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Number of covariates for sample size `n` at aspect ratio `delta = n / d`.
pub fn covariates_for(n: usize, delta: f64) -> usize {
    ((n as f64 / delta).round() as usize).max(1)
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffConfig {
    pub prior: DiscretePrior,
    pub n: usize,
    pub d: usize,
    pub sigma2: f64,
    pub seeds: Vec<u64>,
    /// Local-fdr truncation levels.
    pub tpop_cutoffs: Vec<f64>,
    /// Magnitude thresholds applied to the LASSO estimate at its risk-optimal penalty.
    pub lasso_cutoffs: Vec<f64>,
    pub amp: AmpOptions,
}

impl TradeoffConfig {
    pub fn new(prior: DiscretePrior, n: usize, d: usize, sigma2: f64, seeds: Vec<u64>) -> Self {
        Self {
            prior,
            n,
            d,
            sigma2,
            seeds,
            tpop_cutoffs: linspace(0.01, 1.0, 100),
            lasso_cutoffs: linspace(0.0, 3.0, 101),
            amp: AmpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub procedure: &'static str,
    pub seed: u64,
    pub cutoff: f64,
    pub fdp: f64,
    pub tpp: f64,
    pub fdp_pred: f64,
    pub tpp_pred: f64,
}

impl TradeoffRow {
    pub const HEADER: &'static str = "procedure,seed,cutoff,fdp,tpp,fdp_pred,tpp_pred";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.procedure, self.seed, self.cutoff, self.fdp, self.tpp, self.fdp_pred, self.tpp_pred
        )
    }
}

/// Rows for every seed, ordered by seed, then procedure (`tpop` before `lasso`), then cutoff.
pub fn tradeoff(cfg: &TradeoffConfig) -> Result<Vec<TradeoffRow>> {
    let delta = cfg.n as f64 / cfg.d as f64;
    let cal = solve_tau_star(&cfg.prior, delta, cfg.sigma2)?;
    let ch = cal.channel();
    let tpop_pred: Vec<_> = cfg.tpop_cutoffs.iter().map(|&t| limit_point(&ch, t)).collect();
    let lambda = lasso_optimal_lambda(&cfg.prior, delta, cfg.sigma2)?;
    let lasso_cal = lasso_state_evolution(&cfg.prior, delta, cfg.sigma2, lambda)?;
    let lasso_pred = lasso_limit_curve(&lasso_cal, &cfg.lasso_cutoffs);

    let per_seed: Vec<Result<Vec<TradeoffRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = sample_instance(&cfg.prior, cfg.n, cfg.d, cfg.sigma2, seed)?;
            let beta0 = inst.beta0.as_slice();
            let fit = amp_fit(&inst.x, &inst.y, &cfg.prior, &cfg.amp)?;
            let mut rows = Vec::with_capacity(cfg.tpop_cutoffs.len() + cfg.lasso_cutoffs.len());
            for (&t, pred) in cfg.tpop_cutoffs.iter().zip(&tpop_pred) {
                let sel = tpop(fit.local_fdr.as_slice(), t)?;
                let (fdp, tpp) = fdp_tpp(&sel.rejected, beta0);
                rows.push(TradeoffRow {
                    procedure: "tpop",
                    seed,
                    cutoff: t,
                    fdp,
                    tpp,
                    fdp_pred: pred.fdp,
                    tpp_pred: pred.tpp,
                });
            }
            let lasso = lasso_fit(&inst.x, &inst.y, lambda, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
            for (&t, pred) in cfg.lasso_cutoffs.iter().zip(&lasso_pred) {
                let (fdp, tpp) = fdp_tpp(&thresholded_lasso_select(&lasso, t), beta0);
                rows.push(TradeoffRow {
                    procedure: "lasso",
                    seed,
                    cutoff: t,
                    fdp,
                    tpp,
                    fdp_pred: pred.fdp,
                    tpp_pred: pred.tpp,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_seed {
        out.extend(rows?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: Method,
    /// Prior generating the data; may differ from the one the procedure claims.
    pub data_prior: DiscretePrior,
    pub n: usize,
    pub d: usize,
    /// Noise level generating the data.
    pub sigma2: f64,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    /// `eps = eps_frac * alpha`.
    pub eps_frac: f64,
    /// Procedure settings; `alpha`, `eps` and `seed` are overwritten per row.
    pub procedure: ProcedureConfig,
    /// Free-form label of the data/model pairing, e.g. `well_specified`.
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub procedure: &'static str,
    pub model: String,
    pub alpha: f64,
    pub seed: u64,
    pub fdp: f64,
    pub tpp: f64,
    pub rejections: usize,
    pub runtime_ms: f64,
    /// Hypotheses whose AMP fits did not meet the tolerance.
    pub nonconverged: usize,
    /// Effective noise of each calibration block.
    pub tau: Vec<f64>,
    pub thresholds: Vec<BlockThreshold>,
}

impl RunRow {
    pub const HEADER: &'static str = "procedure,alpha,seed,fdp,tpp,rejections,runtime_ms,model";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.3},{}",
            self.procedure, self.alpha, self.seed, self.fdp, self.tpp, self.rejections, self.runtime_ms, self.model
        )
    }
}

/// One p-value computation per seed, reused across the level grid. Rows are
/// ordered by seed, then level.
pub fn run_procedure(cfg: &RunConfig) -> Result<Vec<RunRow>> {
    if cfg.alphas.is_empty() {
        return Err(invalid("alpha_grid", "at least one level is required"));
    }
    if !(0.0..1.0).contains(&cfg.eps_frac) {
        return Err(invalid("eps_frac", format!("must lie in [0, 1), got {}", cfg.eps_frac)));
    }
    let per_seed: Vec<Result<Vec<RunRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = sample_instance(&cfg.data_prior, cfg.n, cfg.d, cfg.sigma2, seed)?;
            let mut pcfg = cfg.procedure.clone();
            pcfg.seed = seed;
            pcfg.alpha = cfg.alphas[0];
            pcfg.eps = cfg.eps_frac * cfg.alphas[0];
            let run = crt_pvalues(&inst.x, &inst.y, cfg.method, &pcfg)?;
            cfg.alphas
                .iter()
                .map(|&alpha| {
                    let start = Instant::now();
                    let out = select(&run, alpha, cfg.eps_frac * alpha, pcfg.pi0)?;
                    let (fdp, tpp) = fdp_tpp(&out.selection.rejected, inst.beta0.as_slice());
                    Ok(RunRow {
                        procedure: run.method,
                        model: cfg.model.clone(),
                        alpha,
                        seed,
                        fdp,
                        tpp,
                        rejections: out.selection.rejected.len(),
                        runtime_ms: run.runtime_ms + start.elapsed().as_secs_f64() * 1e3,
                        nonconverged: run.nonconverged(),
                        tau: run.blocks.iter().map(|b| b.tau).collect(),
                        thresholds: out.thresholds,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for rows in per_seed {
        out.extend(rows?);
    }
    Ok(out)
}

/// Statistic whose empirical distribution is compared with its limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Statistic {
    PosteriorMean,
    LocalFdr,
    PopcePvalues,
    PoedcePvalues,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PosteriorMean => "posterior_mean",
            Self::LocalFdr => "local_fdr",
            Self::PopcePvalues => "popce_pvalues",
            Self::PoedcePvalues => "poedce_pvalues",
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::PosteriorMean, Self::LocalFdr, Self::PopcePvalues, Self::PoedcePvalues]
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| invalid("which", format!("unknown statistic `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct FormalismConfig {
    pub which: Statistic,
    pub prior: DiscretePrior,
    pub delta: f64,
    pub sigma2: f64,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    /// CRT resamples for the p-value statistics.
    pub k: usize,
    pub amp: AmpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormalismRow {
    pub which: Statistic,
    pub n: usize,
    pub seed: u64,
    pub w1: f64,
}

impl FormalismRow {
    pub const HEADER: &'static str = "which,n,seed,w1";

    pub fn csv(&self) -> String {
        format!("{},{},{},{}", self.which, self.n, self.seed, self.w1)
    }
}

/// `m` draws of `beta0 + tau Z` from the limit-law stream of `(seed, n)`.
pub fn limit_observations(prior: &DiscretePrior, tau: f64, m: usize, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(derive_seed(seed, label::LIMIT_LAW, n as u64, 0));
    (0..m)
        .map(|_| {
            let b = sample_prior(prior, &mut rng);
            b + tau * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

/// W1 between the statistic on one simulated instance and an equal-size limit-law sample.
pub fn formalism_distance(cfg: &FormalismConfig, n: usize, seed: u64) -> Result<f64> {
    let d = covariates_for(n, cfg.delta);
    let inst = sample_instance(&cfg.prior, n, d, cfg.sigma2, seed)?;
    let cal = solve_tau_star(&cfg.prior, n as f64 / d as f64, cfg.sigma2)?;
    let ch = cal.channel();
    let obs = limit_observations(&cfg.prior, cal.tau_star, d, seed, n);
    let mut pcfg = ProcedureConfig::new(0.5, cfg.prior.clone(), cfg.sigma2);
    pcfg.k = cfg.k;
    pcfg.seed = seed;
    pcfg.amp = cfg.amp;
    let (stat, limit): (Vec<f64>, Vec<f64>) = match cfg.which {
        Statistic::PosteriorMean | Statistic::LocalFdr => {
            let fit = amp_fit(&inst.x, &inst.y, &cfg.prior, &cfg.amp)?;
            if cfg.which == Statistic::PosteriorMean {
                (fit.post_mean.iter().copied().collect(), obs.iter().map(|&y| ch.posterior_mean(y)).collect())
            } else {
                (fit.local_fdr.iter().copied().collect(), obs.iter().map(|&y| ch.local_fdr(y)).collect())
            }
        }
        Statistic::PopcePvalues | Statistic::PoedcePvalues => {
            let method = if cfg.which == Statistic::PopcePvalues { Method::Popce } else { Method::Poedce };
            let run = crt_pvalues(&inst.x, &inst.y, method, &pcfg)?;
            let psi = NullFdrCdf::new(&ch);
            (run.p, obs.iter().map(|&y| psi.eval(ch.local_fdr(y))).collect())
        }
    };
    wasserstein1(&stat, &limit)
}

/// Rows ordered by seed, then `n`.
pub fn verify_formalism(cfg: &FormalismConfig) -> Result<Vec<FormalismRow>> {
    let jobs: Vec<(u64, usize)> = cfg.seeds.iter().flat_map(|&s| cfg.ns.iter().map(move |&n| (s, n))).collect();
    jobs.par_iter()
        .map(|&(seed, n)| {
            Ok(FormalismRow {
                which: cfg.which,
                n,
                seed,
                w1: formalism_distance(cfg, n, seed)?,
            })
        })
        .collect()
}

/// Least-squares slope of `log w1` on `log n` using per-`n` means.
pub fn log_log_slope(rows: &[FormalismRow]) -> f64 {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| {
            let w: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.w1).collect();
            ((n as f64).ln(), (w.iter().sum::<f64>() / w.len() as f64).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 3.0, 4), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(covariates_for(2000, 0.8), 2500);
        assert_eq!(covariates_for(250, 1.25), 200);
    }

    #[test]
    fn slope_of_a_power_law() {
        let rows: Vec<FormalismRow> = [100usize, 400, 1600]
            .iter()
            .map(|&n| FormalismRow { which: Statistic::LocalFdr, n, seed: 0, w1: 3.0 / (n as f64).sqrt() })
            .collect();
        assert!((log_log_slope(&rows) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn statistic_names_round_trip() {
        for s in ["posterior_mean", "local_fdr", "popce_pvalues", "poedce_pvalues"] {
            assert_eq!(s.parse::<Statistic>().unwrap().name(), s);
        }
        assert!("pvalues".parse::<Statistic>().is_err());
    }
}
