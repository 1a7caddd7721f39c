//! Finite-sample-valid procedures: PoPCe (full-refit CRT), PoEdCe (distilled
//! CRT) and EPoEdCe (distilled CRT with a block-wise estimated prior).
//!
//! Each run has two stages. [`crt_pvalues`] computes base statistics and CRT
//! p-values, which do not depend on the target level; [`select`] calibrates
//! the indicator e-values at a level and applies eBH. Sweeping a grid of
//! levels therefore reuses one set of p-values.

mod ridge;

pub use ridge::{
    debias_roots, estimate_prior_ridge, mixture_log_likelihood, ridge_estimator, ridge_noise, RidgeEstimate,
    PI1_GRID_POINTS,
};

use crate::amp::{amp_fit, leave_one_out_batch, replaced_column_batch, AmpOptions, LeaveOneOut};
use crate::asymptotics::{fdr_threshold, solve_tau_star, THRESHOLD_GRID_POINTS};
use crate::channel::{NullFdrCdf, ScalarChannel};
use crate::datagen::{column_seed, fill_resampled};
use crate::error::{invalid, Error, Result};
use crate::linalg::dot;
use crate::modelx::{crt_pvalue, ebh, p_to_e};
use crate::prior::DiscretePrior;
use crate::select::SelectionResult;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

/// Problems per batched AMP solve.
pub const DEFAULT_BATCH: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct ProcedureConfig {
    pub alpha: f64,
    /// Calibration slack: the threshold targets a limiting FDR of `alpha - eps`.
    pub eps: f64,
    /// CRT resamples per hypothesis.
    pub k: usize,
    pub seed: u64,
    /// Claimed prior; unused by EPoEdCe, which estimates its own.
    pub prior: DiscretePrior,
    /// Claimed noise level.
    pub sigma2: f64,
    /// Null proportion; eBH uses the budget `pi0 * d`.
    pub pi0: f64,
    pub amp: AmpOptions,
    pub batch: usize,
}

impl ProcedureConfig {
    /// `eps = 0.1 alpha`, `K = 1000`, `pi0` read off the prior.
    pub fn new(alpha: f64, prior: DiscretePrior, sigma2: f64) -> Self {
        Self {
            alpha,
            eps: 0.1 * alpha,
            k: 1000,
            seed: 0,
            pi0: prior.null_weight(),
            prior,
            sigma2,
            amp: AmpOptions::default(),
            batch: DEFAULT_BATCH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_level(self.alpha, self.eps)?;
        if self.k == 0 {
            return Err(invalid("K", "at least one resample is required"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        if !(0.0..=1.0).contains(&self.pi0) {
            return Err(invalid("pi0", format!("must lie in [0, 1], got {}", self.pi0)));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be at least 1"));
        }
        self.amp.validate()
    }
}

fn check_level(alpha: f64, eps: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if !(eps >= 0.0 && eps < alpha) {
        return Err(invalid("eps", format!("must lie in [0, alpha), got {eps}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalBayesConfig {
    /// Number of covariate blocks.
    pub m: usize,
    pub ridge_lambda: f64,
    /// Known null proportion.
    pub pi0: f64,
    /// Known noise level.
    pub sigma2: f64,
}

impl EmpiricalBayesConfig {
    pub fn new(pi0: f64, sigma2: f64) -> Self {
        Self { m: 50, ridge_lambda: 0.1, pi0, sigma2 }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.m < 2 || self.m > d {
            return Err(invalid("M", format!("must lie in [2, d={d}], got {}", self.m)));
        }
        if !(self.ridge_lambda > 0.0) {
            return Err(invalid("ridge_lambda", format!("must be positive, got {}", self.ridge_lambda)));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(invalid("pi0", format!("must lie in (0, 1), got {}", self.pi0)));
        }
        if !(self.sigma2 > 0.0) {
            return Err(invalid("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Popce,
    Poedce,
    Epoedce(EmpiricalBayesConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Popce => "popce",
            Self::Poedce => "poedce",
            Self::Epoedce(_) => "epoedce",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Channel used to score and calibrate a group of hypotheses.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCalibration {
    pub members: Range<usize>,
    pub prior: DiscretePrior,
    pub tau: f64,
    pub sigma2: f64,
    pub delta: f64,
    /// Estimated positive mass (EPoEdCe only).
    pub pi1_hat: Option<f64>,
    /// Estimation failed and the family midpoint was used instead.
    pub fallback: bool,
}

impl BlockCalibration {
    pub fn channel(&self) -> ScalarChannel<'_> {
        ScalarChannel::new(&self.prior, self.tau).expect("positive tau")
    }

    /// Limiting-FDR threshold `t` at `target` and its calibration level `q = Psi(t)`.
    pub fn threshold(&self, target: f64) -> (f64, f64) {
        let ch = self.channel();
        let t = fdr_threshold(&ch, target, THRESHOLD_GRID_POINTS);
        (t, NullFdrCdf::new(&ch).eval(t))
    }
}

/// Base statistics and CRT p-values of one run.
#[derive(Debug, Clone, Serialize)]
pub struct CrtRun {
    pub method: &'static str,
    pub d: usize,
    pub k: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// Whether every AMP fit behind hypothesis `j` met its tolerance.
    pub converged: Vec<bool>,
    pub blocks: Vec<BlockCalibration>,
    /// Number of AMP solves performed.
    pub amp_fits: usize,
    pub runtime_ms: f64,
}

impl CrtRun {
    pub fn block_of(&self, j: usize) -> usize {
        self.blocks.partition_point(|b| b.members.end <= j)
    }

    pub fn nonconverged(&self) -> usize {
        self.converged.iter().filter(|&&c| !c).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockThreshold {
    pub t: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcedureOutcome {
    pub selection: SelectionResult,
    pub alpha: f64,
    pub eps: f64,
    pub e: Vec<f64>,
    /// One entry per calibration block.
    pub thresholds: Vec<BlockThreshold>,
}

impl ProcedureOutcome {
    pub fn rejected_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.e.len()];
        for &j in &self.selection.rejected {
            mask[j] = true;
        }
        mask
    }
}

fn check_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!("Y has {} rows, X has {}", y.len(), x.nrows())));
    }
    if x.ncols() < 2 {
        return Err(invalid("d", "at least two covariates are required"));
    }
    Ok(())
}

/// Near-equal contiguous blocks covering `0..d`; the first `d % m` have one extra member.
pub fn partition(d: usize, m: usize) -> Vec<Range<usize>> {
    let (base, extra) = (d / m, d % m);
    let mut start = 0;
    (0..m)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Computes base statistics and CRT p-values. Hypotheses whose AMP fits hit the
/// iteration cap are kept and flagged in [`CrtRun::converged`].
pub fn crt_pvalues(x: &DMatrix<f64>, y: &DVector<f64>, method: Method, cfg: &ProcedureConfig) -> Result<CrtRun> {
    cfg.validate()?;
    check_data(x, y)?;
    let start = Instant::now();
    let mut run = match method {
        Method::Popce => popce_stats(x, y, cfg)?,
        Method::Poedce => {
            let delta = x.nrows() as f64 / x.ncols() as f64;
            let cal = solve_tau_star(&cfg.prior, delta, cfg.sigma2)?;
            let block = BlockCalibration {
                members: 0..x.ncols(),
                prior: cfg.prior.clone(),
                tau: cal.tau_star,
                sigma2: cfg.sigma2,
                delta,
                pi1_hat: None,
                fallback: false,
            };
            distilled_stats(x, y, vec![block], cfg)?
        }
        Method::Epoedce(eb) => {
            eb.validate(x.ncols())?;
            let blocks = estimate_blocks(x, y, &eb)?;
            distilled_stats(x, y, blocks, cfg)?
        }
    };
    run.method = method.name();
    run.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(run)
}

/// Calibrates e-values at level `alpha` and applies eBH with budget `pi0 * d`.
pub fn select(run: &CrtRun, alpha: f64, eps: f64, pi0: f64) -> Result<ProcedureOutcome> {
    check_level(alpha, eps)?;
    let thresholds: Vec<BlockThreshold> = run
        .blocks
        .iter()
        .map(|b| {
            let (t, q) = b.threshold(alpha - eps);
            BlockThreshold { t, q }
        })
        .collect();
    let mut e = vec![0.0; run.d];
    for (b, block) in run.blocks.iter().enumerate() {
        let q = thresholds[b].q;
        if q > 0.0 {
            for j in block.members.clone() {
                e[j] = p_to_e(run.p[j], q)?;
            }
        }
    }
    let rejected = ebh(&e, pi0 * run.d as f64, alpha);
    let threshold_used = if thresholds.len() == 1 { thresholds[0].t } else { f64::NAN };
    Ok(ProcedureOutcome {
        selection: SelectionResult { rejected, threshold_used, k_hat: None },
        alpha,
        eps,
        e,
        thresholds,
    })
}

fn run_method(x: &DMatrix<f64>, y: &DVector<f64>, method: Method, cfg: &ProcedureConfig) -> Result<(CrtRun, ProcedureOutcome)> {
    let run = crt_pvalues(x, y, method, cfg)?;
    let out = select(&run, cfg.alpha, cfg.eps, cfg.pi0)?;
    Ok((run, out))
}

/// Full-refit CRT on local fdrs: `1 + d K` AMP fits.
pub fn popce(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &ProcedureConfig) -> Result<(CrtRun, ProcedureOutcome)> {
    run_method(x, y, Method::Popce, cfg)
}

/// Distilled CRT: one leave-one-out AMP fit per hypothesis.
pub fn poedce(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &ProcedureConfig) -> Result<(CrtRun, ProcedureOutcome)> {
    run_method(x, y, Method::Poedce, cfg)
}

/// Distilled CRT with a prior estimated block-wise without the block's own columns.
pub fn epoedce(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    eb: EmpiricalBayesConfig,
    cfg: &ProcedureConfig,
) -> Result<(CrtRun, ProcedureOutcome)> {
    let mut cfg = cfg.clone();
    cfg.pi0 = eb.pi0;
    cfg.sigma2 = eb.sigma2;
    run_method(x, y, Method::Epoedce(eb), &cfg)
}

fn popce_stats(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &ProcedureConfig) -> Result<CrtRun> {
    let (n, d) = x.shape();
    let delta = n as f64 / d as f64;
    let cal = solve_tau_star(&cfg.prior, delta, cfg.sigma2)?;
    let full = amp_fit(x, y, &cfg.prior, &cfg.amp)?;
    let per_j: Vec<Result<(f64, bool)>> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut draws = Vec::with_capacity(cfg.k);
            let mut converged = true;
            for chunk in (0..cfg.k).collect::<Vec<_>>().chunks(cfg.batch) {
                let cols: Vec<Vec<f64>> = chunk
                    .iter()
                    .map(|&k| {
                        let mut c = vec![0.0; n];
                        fill_resampled(&mut c, column_seed(cfg.seed, j, k));
                        c
                    })
                    .collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                for fit in replaced_column_batch(x, y, j, &refs, &cfg.prior, &cfg.amp)? {
                    draws.push(fit.local_fdr);
                    converged &= fit.converged;
                }
            }
            Ok((crt_pvalue(full.local_fdr[j], &draws), converged))
        })
        .collect();
    let mut p = Vec::with_capacity(d);
    let mut converged = Vec::with_capacity(d);
    for r in per_j {
        let (pj, cj) = r?;
        p.push(pj);
        converged.push(cj && full.converged);
    }
    Ok(CrtRun {
        method: "popce",
        d,
        k: cfg.k,
        u: full.local_fdr.iter().copied().collect(),
        p,
        converged,
        blocks: vec![BlockCalibration {
            members: 0..d,
            prior: cfg.prior.clone(),
            tau: cal.tau_star,
            sigma2: cfg.sigma2,
            delta,
            pi1_hat: None,
            fallback: false,
        }],
        amp_fits: 1 + d * cfg.k,
        runtime_ms: 0.0,
    })
}

/// Local fdr of the distilled statistic `(tau^2 / sigma^2) <r, x>`.
fn distilled_fdr(ch: &ScalarChannel<'_>, scale: f64, residual: &[f64], column: &[f64]) -> f64 {
    ch.local_fdr(scale * dot(residual, column))
}

/// Leave-one-out residuals for `members`, in order.
fn residuals(x: &DMatrix<f64>, y: &DVector<f64>, members: Range<usize>, prior: &DiscretePrior, cfg: &ProcedureConfig) -> Result<Vec<LeaveOneOut>> {
    let js: Vec<usize> = members.collect();
    let mut out = Vec::with_capacity(js.len());
    for chunk in js.chunks(cfg.batch) {
        out.extend(leave_one_out_batch(x, y, chunk, prior, &cfg.amp)?);
    }
    Ok(out)
}

fn distilled_stats(x: &DMatrix<f64>, y: &DVector<f64>, blocks: Vec<BlockCalibration>, cfg: &ProcedureConfig) -> Result<CrtRun> {
    let (n, d) = x.shape();
    let mut u = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut converged = vec![false; d];
    for block in &blocks {
        let fits = residuals(x, y, block.members.clone(), &block.prior, cfg)?;
        let ch = block.channel();
        let scale = block.tau * block.tau / block.sigma2;
        let stats: Vec<(f64, f64)> = block
            .members
            .clone()
            .into_par_iter()
            .map(|j| {
                let r = fits[j - block.members.start].residual.as_slice();
                let uj = distilled_fdr(&ch, scale, r, crate::linalg::column(x, j));
                let mut col = vec![0.0; n];
                let draws: Vec<f64> = (0..cfg.k)
                    .map(|k| {
                        fill_resampled(&mut col, column_seed(cfg.seed, j, k));
                        distilled_fdr(&ch, scale, r, &col)
                    })
                    .collect();
                (uj, crt_pvalue(uj, &draws))
            })
            .collect();
        for (i, j) in block.members.clone().enumerate() {
            (u[j], p[j]) = stats[i];
            converged[j] = fits[i].converged;
        }
    }
    Ok(CrtRun {
        method: "poedce",
        d,
        k: cfg.k,
        u,
        p,
        converged,
        blocks,
        amp_fits: d,
        runtime_ms: 0.0,
    })
}

/// Per-block prior estimates and calibrations, each computed from the
/// covariates outside the block.
pub fn estimate_blocks(x: &DMatrix<f64>, y: &DVector<f64>, eb: &EmpiricalBayesConfig) -> Result<Vec<BlockCalibration>> {
    let (n, d) = x.shape();
    let delta_eff = n as f64 / d as f64 * eb.m as f64 / (eb.m - 1) as f64;
    partition(d, eb.m)
        .into_iter()
        .map(|members| {
            let keep: Vec<usize> = (0..d).filter(|c| !members.contains(c)).collect();
            let x_sub = x.select_columns(&keep);
            let estimate = estimate_prior_ridge(y, &x_sub, eb.pi0, eb.sigma2, eb.ridge_lambda, delta_eff);
            let (pi1, fallback) = match estimate {
                Ok(est) => (est.pi1, false),
                Err(Error::Estimation(_)) => ((1.0 - eb.pi0) / 2.0, true),
                Err(e) => return Err(e),
            };
            let prior = DiscretePrior::three_point(eb.pi0, pi1)?;
            let cal = solve_tau_star(&prior, delta_eff, eb.sigma2)?;
            Ok(BlockCalibration {
                members,
                prior,
                tau: cal.tau_star,
                sigma2: eb.sigma2,
                delta: delta_eff,
                pi1_hat: Some(pi1),
                fallback,
            })
        })
        .collect()
}

/// Writes `j,u,p,e,rejected,converged` rows.
pub fn write_csv(path: &Path, run: &CrtRun, outcome: &ProcedureOutcome) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "j,u,p,e,rejected,converged")?;
    let mask = outcome.rejected_mask();
    for j in 0..run.d {
        writeln!(
            w,
            "{j},{},{},{},{},{}",
            run.u[j], run.p[j], outcome.e[j], mask[j], run.converged[j]
        )?;
    }
    w.flush()?;
    Ok(())
}
