//! Bayes-optimal approximate message passing for `Y = X beta0 + noise`.
//!
//! The denoiser is the scalar posterior mean of the prior at the current
//! effective noise `tau_t^2 = |z^t|^2 / n`, and the Onsager memory term uses the
//! posterior variance divided by `tau_t^2` as the denoiser derivative.

use crate::channel::ScalarChannel;
use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot};
use crate::prior::DiscretePrior;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmpOptions {
    pub max_iters: usize,
    /// Stop once the root-mean-square change of the estimate drops below this.
    pub tol: f64,
    /// Weight on the previous estimate in a convex combination; 0 disables damping.
    pub damping: f64,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-8,
            damping: 0.0,
        }
    }
}

impl AmpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {}", self.tol)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(invalid("damping", format!("must lie in [0, 1), got {}", self.damping)));
        }
        Ok(())
    }
}

/// A design matrix seen through a column mask.
///
/// `skip` removes one column entirely; `replace` substitutes another column's
/// values without touching the original storage. Excluded or replaced columns
/// of the underlying matrix are never read.
#[derive(Clone, Copy)]
pub struct Design<'a> {
    x: &'a DMatrix<f64>,
    skip: Option<usize>,
    replace: Option<(usize, &'a [f64])>,
}

impl<'a> Design<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Self {
        Self { x, skip: None, replace: None }
    }

    pub fn without(x: &'a DMatrix<f64>, j: usize) -> Self {
        Self { x, skip: Some(j), replace: None }
    }

    pub fn with_column(x: &'a DMatrix<f64>, j: usize, column: &'a [f64]) -> Self {
        assert_eq!(column.len(), x.nrows(), "replacement column length");
        Self { x, skip: None, replace: Some((j, column)) }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Columns of the underlying matrix, including a skipped one.
    pub fn width(&self) -> usize {
        self.x.ncols()
    }

    /// Number of active columns.
    pub fn active(&self) -> usize {
        self.width() - usize::from(self.skip.is_some())
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.skip != Some(c)
    }

    pub fn column(&self, c: usize) -> &'a [f64] {
        match self.replace {
            Some((j, col)) if j == c => col,
            _ => {
                crate::linalg::column(self.x, c)
            }
        }
    }

    /// `X^T z` over active columns; inactive entries are zero.
    pub fn tr_mul(&self, z: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = if self.is_active(c) { dot(self.column(c), z) } else { 0.0 };
        }
    }

    /// `X m` over active columns.
    pub fn mul(&self, m: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, &mc) in m.iter().enumerate() {
            if mc != 0.0 && self.is_active(c) {
                axpy(mc, self.column(c), out);
            }
        }
    }
}

/// Iterate of the recursion: estimate `m^t`, corrected residual `z^t`.
#[derive(Debug, Clone)]
pub struct AmpState {
    pub m: DVector<f64>,
    pub z: DVector<f64>,
}

impl AmpState {
    /// `m^0 = 0`, `z^0 = Y`.
    pub fn cold(d: usize, y: &DVector<f64>) -> Self {
        Self { m: DVector::zeros(d), z: y.clone() }
    }
}

/// One step `(m^t, z^t) -> (m^{t+1}, z^{t+1})`; also returns `tau_t^2`.
pub fn amp_step(design: &Design<'_>, y: &DVector<f64>, prior: &DiscretePrior, state: &AmpState, damping: f64) -> (AmpState, f64) {
    let n = design.n();
    let d = design.width();
    let tau2 = effective_noise(&state.z);
    let ch = ScalarChannel::new(prior, tau2.sqrt()).expect("positive effective noise");
    let mut v = vec![0.0; d];
    design.tr_mul(state.z.as_slice(), &mut v);
    let mut m = DVector::zeros(d);
    let mut deriv = 0.0;
    for c in 0..d {
        if !design.is_active(c) {
            continue;
        }
        let mom = ch.moments(state.m[c] + v[c]);
        m[c] = (1.0 - damping) * mom.mean + damping * state.m[c];
        deriv += mom.variance / tau2;
    }
    let onsager = deriv / n as f64;
    let mut xm = vec![0.0; n];
    design.mul(m.as_slice(), &mut xm);
    let z = DVector::from_fn(n, |i, _| y[i] - xm[i] + onsager * state.z[i]);
    (AmpState { m, z }, tau2)
}

/// Smallest effective noise used when the residual vanishes.
const MIN_TAU2: f64 = 1e-300;

fn effective_noise(z: &DVector<f64>) -> f64 {
    (z.norm_squared() / z.len() as f64).max(MIN_TAU2)
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    /// Posterior-mean estimates; zero at a skipped column.
    pub post_mean: DVector<f64>,
    /// Local fdr estimates; one at a skipped column.
    pub local_fdr: DVector<f64>,
    pub tau_hat: f64,
    pub iters_used: usize,
    pub converged: bool,
    /// Final iterate, usable as a warm start.
    pub state: AmpState,
}

/// Runs AMP from `init` (cold start when `None`) and post-processes the final
/// iterate at the effective observations `m^T + X^T z^T`.
pub fn amp_fit_design(
    design: &Design<'_>,
    y: &DVector<f64>,
    prior: &DiscretePrior,
    opts: &AmpOptions,
    init: Option<&AmpState>,
) -> Result<PosteriorSummary> {
    opts.validate()?;
    if y.len() != design.n() {
        return Err(Error::Dimension(format!("Y has {} rows, X has {}", y.len(), design.n())));
    }
    let d = design.width();
    let mut state = match init {
        Some(s) if s.m.len() == d && s.z.len() == y.len() => s.clone(),
        Some(_) => return Err(Error::Dimension("warm start does not match the design".into())),
        None => AmpState::cold(d, y),
    };
    if let Some(c) = design.skip {
        state.m[c] = 0.0;
    }
    let active = design.active().max(1) as f64;
    let mut iters_used = 0;
    let mut converged = false;
    while iters_used < opts.max_iters {
        let (next, _) = amp_step(design, y, prior, &state, opts.damping);
        let change = ((&next.m - &state.m).norm_squared() / active).sqrt();
        state = next;
        iters_used += 1;
        if !change.is_finite() {
            break;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let tau2 = effective_noise(&state.z);
    let ch = ScalarChannel::new(prior, tau2.sqrt()).expect("positive effective noise");
    let mut v = vec![0.0; d];
    design.tr_mul(state.z.as_slice(), &mut v);
    let mut post_mean = DVector::zeros(d);
    let mut local_fdr = DVector::from_element(d, 1.0);
    for c in (0..d).filter(|&c| design.is_active(c)) {
        let mom = ch.moments(state.m[c] + v[c]);
        post_mean[c] = mom.mean;
        local_fdr[c] = mom.null_prob;
    }
    Ok(PosteriorSummary {
        post_mean,
        local_fdr,
        tau_hat: tau2.sqrt(),
        iters_used,
        converged,
        state,
    })
}

pub fn amp_fit(x: &DMatrix<f64>, y: &DVector<f64>, prior: &DiscretePrior, opts: &AmpOptions) -> Result<PosteriorSummary> {
    amp_fit_design(&Design::new(x), y, prior, opts, None)
}

/// Fit on `(Y, X_{-j})`.
#[derive(Debug, Clone)]
pub struct LeaveOneOut {
    /// Posterior means of the remaining `d - 1` coefficients, in column order.
    pub beta_hat: DVector<f64>,
    pub tau_hat: f64,
    /// `Y - X_{-j} beta_hat`.
    pub residual: DVector<f64>,
    pub iters_used: usize,
    pub converged: bool,
}

pub fn leave_one_out_fit(x: &DMatrix<f64>, y: &DVector<f64>, j: usize, prior: &DiscretePrior, opts: &AmpOptions) -> Result<LeaveOneOut> {
    leave_one_out_from(x, y, j, prior, opts, None)
}

/// Leave-one-out fit started from `init`, which must not depend on column `j`.
pub fn leave_one_out_from(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    j: usize,
    prior: &DiscretePrior,
    opts: &AmpOptions,
    init: Option<&AmpState>,
) -> Result<LeaveOneOut> {
    if j >= x.ncols() {
        return Err(invalid("j", format!("column {j} out of range for d={}", x.ncols())));
    }
    let design = Design::without(x, j);
    let fit = amp_fit_design(&design, y, prior, opts, init)?;
    let mut xb = vec![0.0; x.nrows()];
    design.mul(fit.post_mean.as_slice(), &mut xb);
    let residual = DVector::from_fn(x.nrows(), |i, _| y[i] - xb[i]);
    let beta_hat = DVector::from_iterator(
        x.ncols() - 1,
        (0..x.ncols()).filter(|&c| c != j).map(|c| fit.post_mean[c]),
    );
    Ok(LeaveOneOut {
        beta_hat,
        tau_hat: fit.tau_hat,
        residual,
        iters_used: fit.iters_used,
        converged: fit.converged,
    })
}

/// One problem of a batched fit: column `j` of the shared design is either
/// dropped or replaced by `replacement`.
#[derive(Clone, Copy)]
struct BatchProblem<'a> {
    j: usize,
    replacement: Option<&'a [f64]>,
}

struct BatchState {
    m: DMatrix<f64>,
    z: DMatrix<f64>,
    iters: Vec<usize>,
    converged: Vec<bool>,
}

/// Effective observations `m + X^T z` for the problems listed in `cols`.
fn batch_observations(x: &DMatrix<f64>, problems: &[BatchProblem<'_>], cols: &[usize], m: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut v = m + x.tr_mul(z);
    for (r, &p) in cols.iter().enumerate() {
        let BatchProblem { j, replacement } = problems[p];
        v[(j, r)] = match replacement {
            Some(col) => m[(j, r)] + dot(col, z.column(r).as_slice()),
            None => 0.0,
        };
    }
    v
}

/// `X m` per problem; the coefficient of column `j` multiplies the replacement
/// column (or nothing) instead of the stored one.
fn batch_products(x: &DMatrix<f64>, problems: &[BatchProblem<'_>], cols: &[usize], m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut masked = m.clone();
    for (r, &p) in cols.iter().enumerate() {
        masked[(problems[p].j, r)] = 0.0;
    }
    let mut xm = x * &masked;
    for (r, &p) in cols.iter().enumerate() {
        if let Some(col) = problems[p].replacement {
            axpy(m[(problems[p].j, r)], col, xm.column_mut(r).as_mut_slice());
        }
    }
    xm
}

/// Runs AMP for all problems at once from a cold start.
///
/// The problems share the design, so each iteration is two matrix-matrix
/// products instead of `2 * problems.len()` matrix-vector products. Each
/// problem stops updating once its own tolerance is met, so its iterates are
/// those of [`amp_fit_design`] on the corresponding [`Design`].
fn batch_iterate(x: &DMatrix<f64>, y: &DVector<f64>, problems: &[BatchProblem<'_>], prior: &DiscretePrior, opts: &AmpOptions) -> Result<BatchState> {
    opts.validate()?;
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("Y has {} rows, X has {n}", y.len())));
    }
    for p in problems {
        if p.j >= d {
            return Err(invalid("j", format!("column {} out of range for d={d}", p.j)));
        }
        if p.replacement.is_some_and(|c| c.len() != n) {
            return Err(Error::Dimension("replacement column length".into()));
        }
    }
    let b = problems.len();
    let mut st = BatchState {
        m: DMatrix::zeros(d, b),
        z: DMatrix::from_fn(n, b, |i, _| y[i]),
        iters: vec![0; b],
        converged: vec![false; b],
    };
    let mut running: Vec<usize> = (0..b).collect();
    while !running.is_empty() {
        let zr = st.z.select_columns(&running);
        let mr = st.m.select_columns(&running);
        let v = batch_observations(x, problems, &running, &mr, &zr);
        let mut next = DMatrix::<f64>::zeros(d, running.len());
        let mut onsager = vec![0.0; running.len()];
        for (r, &p) in running.iter().enumerate() {
            let tau2 = (zr.column(r).norm_squared() / n as f64).max(MIN_TAU2);
            let ch = ScalarChannel::new(prior, tau2.sqrt()).expect("positive effective noise");
            let skip = problems[p].replacement.is_none().then_some(problems[p].j);
            let mut deriv = 0.0;
            for c in (0..d).filter(|&c| Some(c) != skip) {
                let mom = ch.moments(v[(c, r)]);
                next[(c, r)] = (1.0 - opts.damping) * mom.mean + opts.damping * mr[(c, r)];
                deriv += mom.variance / tau2;
            }
            onsager[r] = deriv / n as f64;
        }
        let xm = batch_products(x, problems, &running, &next);
        let mut still = Vec::with_capacity(running.len());
        for (r, &p) in running.iter().enumerate() {
            let active = (d - usize::from(problems[p].replacement.is_none())).max(1) as f64;
            let change = ((next.column(r) - mr.column(r)).norm_squared() / active).sqrt();
            for i in 0..n {
                st.z[(i, p)] = y[i] - xm[(i, r)] + onsager[r] * zr[(i, r)];
            }
            st.m.set_column(p, &next.column(r));
            st.iters[p] += 1;
            if change < opts.tol {
                st.converged[p] = true;
            } else if change.is_finite() && st.iters[p] < opts.max_iters {
                still.push(p);
            }
        }
        running = still;
    }
    Ok(st)
}

fn batch_taus(z: &DMatrix<f64>) -> Vec<f64> {
    z.column_iter().map(|c| (c.norm_squared() / z.nrows() as f64).max(MIN_TAU2).sqrt()).collect()
}

/// Leave-one-out fits for several columns at once, matching [`leave_one_out_fit`].
///
/// Column `j` of problem `j` enters only through a coefficient pinned to
/// exactly zero, so for finite data its values never affect that problem's output.
pub fn leave_one_out_batch(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    js: &[usize],
    prior: &DiscretePrior,
    opts: &AmpOptions,
) -> Result<Vec<LeaveOneOut>> {
    let problems: Vec<BatchProblem<'_>> = js.iter().map(|&j| BatchProblem { j, replacement: None }).collect();
    let st = batch_iterate(x, y, &problems, prior, opts)?;
    let (n, d) = x.shape();
    let all: Vec<usize> = (0..js.len()).collect();
    let v = batch_observations(x, &problems, &all, &st.m, &st.z);
    let taus = batch_taus(&st.z);
    let mut post = DMatrix::<f64>::zeros(d, js.len());
    for (p, &j) in js.iter().enumerate() {
        let ch = ScalarChannel::new(prior, taus[p]).expect("positive effective noise");
        for c in (0..d).filter(|&c| c != j) {
            post[(c, p)] = ch.moments(v[(c, p)]).mean;
        }
    }
    let xb = batch_products(x, &problems, &all, &post);
    Ok(js
        .iter()
        .enumerate()
        .map(|(p, &j)| LeaveOneOut {
            beta_hat: DVector::from_iterator(d - 1, (0..d).filter(|&c| c != j).map(|c| post[(c, p)])),
            tau_hat: taus[p],
            residual: DVector::from_fn(n, |i, _| y[i] - xb[(i, p)]),
            iters_used: st.iters[p],
            converged: st.converged[p],
        })
        .collect())
}

/// Local fdr of coordinate `j` after replacing column `j` by each of `columns`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplacedFit {
    pub local_fdr: f64,
    pub iters_used: usize,
    pub converged: bool,
}

/// Fits on `(Y, X with column j replaced)` for every replacement, matching
/// [`amp_fit_design`] with [`Design::with_column`] from a cold start.
pub fn replaced_column_batch(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    j: usize,
    columns: &[&[f64]],
    prior: &DiscretePrior,
    opts: &AmpOptions,
) -> Result<Vec<ReplacedFit>> {
    let problems: Vec<BatchProblem<'_>> = columns.iter().map(|&c| BatchProblem { j, replacement: Some(c) }).collect();
    let st = batch_iterate(x, y, &problems, prior, opts)?;
    let taus = batch_taus(&st.z);
    Ok(columns
        .iter()
        .enumerate()
        .map(|(p, col)| {
            let ch = ScalarChannel::new(prior, taus[p]).expect("positive effective noise");
            let obs = st.m[(j, p)] + dot(col, st.z.column(p).as_slice());
            ReplacedFit {
                local_fdr: ch.local_fdr(obs),
                iters_used: st.iters[p],
                converged: st.converged[p],
            }
        })
        .collect())
}
