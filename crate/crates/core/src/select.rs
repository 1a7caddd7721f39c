//! Local-fdr selectors: truncation (TPoP) and the cumulative rule (CPoP).

use crate::error::{invalid, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// Rejected hypotheses in increasing index order.
    pub rejected: Vec<usize>,
    pub threshold_used: f64,
    /// Number of rejections chosen by the cumulative rule.
    pub k_hat: Option<usize>,
}

fn check_fdrs(local_fdrs: &[f64]) -> Result<()> {
    match local_fdrs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        Some(j) => Err(invalid(
            "local_fdrs",
            format!("entry {j} is {} (must lie in [0, 1])", local_fdrs[j]),
        )),
        None => Ok(()),
    }
}

/// Rejects `{j : P_j < t}`.
pub fn tpop(local_fdrs: &[f64], t: f64) -> Result<SelectionResult> {
    check_fdrs(local_fdrs)?;
    Ok(SelectionResult {
        rejected: (0..local_fdrs.len()).filter(|&j| local_fdrs[j] < t).collect(),
        threshold_used: t,
        k_hat: None,
    })
}

/// `K - (1 + lambda N / K) sum_{j<=K} P_(j)` for `K = 1..=d`, given ascending fdrs.
pub fn cpop_objectives(sorted: &[f64], lambda: f64, expected_nonnulls: f64) -> Vec<f64> {
    let mut cumulative = 0.0;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let k = (i + 1) as f64;
            cumulative += p;
            k - (1.0 + lambda * expected_nonnulls / k) * cumulative
        })
        .collect()
}

/// Cumulative rule: `K_hat` maximizes [`cpop_objectives`] (ties to the
/// smallest `K`) and `{j : P_j < P_(K_hat)}` is rejected.
pub fn cpop(local_fdrs: &[f64], lambda: f64, expected_nonnulls: f64) -> Result<SelectionResult> {
    check_fdrs(local_fdrs)?;
    if !(lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be nonnegative, got {lambda}")));
    }
    if local_fdrs.is_empty() {
        return Ok(SelectionResult {
            rejected: Vec::new(),
            threshold_used: 0.0,
            k_hat: None,
        });
    }
    let mut sorted = local_fdrs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let objectives = cpop_objectives(&sorted, lambda, expected_nonnulls);
    let mut best = 0;
    for k in 1..objectives.len() {
        if objectives[k] > objectives[best] {
            best = k;
        }
    }
    let threshold = sorted[best];
    let mut out = tpop(local_fdrs, threshold)?;
    out.k_hat = Some(best + 1);
    Ok(out)
}
