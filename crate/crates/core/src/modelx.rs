//! Conditional randomization p-values, the indicator calibrator and eBH.

use crate::error::{invalid, Result};

/// `(1 + #{k : u >= u_k}) / (K + 1)`; small statistics are evidence against the null.
pub fn crt_pvalue(u: f64, u_resampled: &[f64]) -> f64 {
    let below = u_resampled.iter().filter(|&&uk| u >= uk).count();
    (1 + below) as f64 / (u_resampled.len() + 1) as f64
}

/// Indicator calibrator `1{p <= q} / q`.
pub fn p_to_e(p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("q", format!("calibration level must lie in (0, 1], got {q}")));
    }
    Ok(if p <= q { 1.0 / q } else { 0.0 })
}

/// Indices sorted by decreasing e-value, ties by increasing index.
fn ranked(evalues: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..evalues.len()).collect();
    order.sort_by(|&a, &b| evalues[b].total_cmp(&evalues[a]).then(a.cmp(&b)));
    order
}

/// The eBH test `d0 / (k e_(k)) <= alpha` at rank `k`.
fn ebh_passes(d0: f64, k: usize, e: f64, alpha: f64) -> bool {
    d0 / (k as f64 * e) <= alpha
}

/// Number of rejections `k_hat = max{k : d0 / (k e_(k)) <= alpha}` (0 if none).
pub fn ebh_count(evalues: &[f64], d0: f64, alpha: f64) -> usize {
    let order = ranked(evalues);
    (1..=order.len())
        .rev()
        .find(|&k| ebh_passes(d0, k, evalues[order[k - 1]], alpha))
        .unwrap_or(0)
}

/// eBH with null-count budget `d0`: the `k_hat` largest e-values, returned in
/// increasing index order.
pub fn ebh(evalues: &[f64], d0: f64, alpha: f64) -> Vec<usize> {
    let k = ebh_count(evalues, d0, alpha);
    let mut out: Vec<usize> = ranked(evalues).into_iter().take(k).collect();
    out.sort_unstable();
    out
}

/// Whether eBH on indicator e-values rejects exactly `{j : p_j <= q}`:
/// `q pi0 d / |{p_j <= q}| <= alpha`, evaluated with the same arithmetic as [`ebh`].
pub fn ebh_shortcut_check(pvalues: &[f64], q: f64, pi0: f64, d: usize, alpha: f64) -> bool {
    let r = pvalues.iter().filter(|&&p| p <= q).count();
    r > 0 && ebh_passes(pi0 * d as f64, r, 1.0 / q, alpha)
}
