//! FDP/TPP accounting, Monte Carlo summaries and the 1-Wasserstein distance.

use crate::error::{invalid, Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub rejections: usize,
    pub false_discoveries: usize,
    pub true_discoveries: usize,
    pub nonnulls: usize,
}

impl ConfusionCounts {
    /// Counts for a rejection set; nulls are the zero coordinates of `beta0`.
    pub fn new(rejected: &[usize], beta0: &[f64]) -> Self {
        let false_discoveries = rejected.iter().filter(|&&j| beta0[j] == 0.0).count();
        Self {
            rejections: rejected.len(),
            false_discoveries,
            true_discoveries: rejected.len() - false_discoveries,
            nonnulls: beta0.iter().filter(|&&b| b != 0.0).count(),
        }
    }

    pub fn fdp(&self) -> f64 {
        self.false_discoveries as f64 / self.rejections.max(1) as f64
    }

    pub fn tpp(&self) -> f64 {
        self.true_discoveries as f64 / self.nonnulls.max(1) as f64
    }
}

/// `(FD / (R v 1), TD / (|S| v 1))`.
pub fn fdp_tpp(rejected: &[usize], beta0: &[f64]) -> (f64, f64) {
    let c = ConfusionCounts::new(rejected, beta0);
    (c.fdp(), c.tpp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub mean_fdp: f64,
    pub mean_tpp: f64,
    pub se_fdp: f64,
    pub se_tpp: f64,
    pub runs: usize,
}

/// Mean and standard error (`sd / sqrt(runs)`); the error is zero for a single run.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / r as f64;
    if r == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

pub fn mc_fdr_tpr(runs: &[(f64, f64)]) -> Result<McSummary> {
    if runs.is_empty() {
        return Err(invalid("runs", "at least one run is required"));
    }
    let (mean_fdp, se_fdp) = mean_se(&runs.iter().map(|r| r.0).collect::<Vec<_>>());
    let (mean_tpp, se_tpp) = mean_se(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    Ok(McSummary {
        mean_fdp,
        mean_tpp,
        se_fdp,
        se_tpp,
        runs: runs.len(),
    })
}

/// Ratio-of-sums estimators `(sum FD / sum R, sum TD / sum |S|)` with `0/0 = 0`.
pub fn mfdr_mtpr(runs: &[ConfusionCounts]) -> (f64, f64) {
    let sum = |f: fn(&ConfusionCounts) -> usize| runs.iter().map(f).sum::<usize>();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (
        ratio(sum(|c| c.false_discoveries), sum(|c| c.rejections)),
        ratio(sum(|c| c.true_discoveries), sum(|c| c.nonnulls)),
    )
}

/// `W1` between two equal-size empirical distributions: mean absolute
/// difference of the order statistics.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "samples must have equal size, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fdp_tpp_conventions() {
        let beta = [0.0, 1.0, 0.0, -1.0, 0.0];
        assert_eq!(fdp_tpp(&[], &beta), (0.0, 0.0));
        assert_eq!(fdp_tpp(&[0, 1, 3, 2], &beta).0, 0.5);
        assert_eq!(fdp_tpp(&[0, 1, 3, 4], &beta), (0.5, 1.0));
        let c = ConfusionCounts::new(&[1, 2], &beta);
        assert_eq!(c.false_discoveries + c.true_discoveries, c.rejections);
    }

    #[test]
    fn monte_carlo_summary() {
        let one = mc_fdr_tpr(&[(0.2, 0.7)]).unwrap();
        assert_eq!((one.mean_fdp, one.mean_tpp, one.se_fdp, one.se_tpp), (0.2, 0.7, 0.0, 0.0));
        let flat = mc_fdr_tpr(&[(0.1, 0.5); 4]).unwrap();
        assert_eq!(flat.se_fdp, 0.0);
        assert!(mc_fdr_tpr(&[]).is_err());
    }

    #[test]
    fn marginal_ratios() {
        assert_eq!(mfdr_mtpr(&[ConfusionCounts { nonnulls: 3, ..Default::default() }]), (0.0, 0.0));
        let run = ConfusionCounts {
            rejections: 4,
            false_discoveries: 1,
            true_discoveries: 3,
            nonnulls: 6,
        };
        assert_eq!(mfdr_mtpr(&[run]), (run.fdp(), run.tpp()));
    }

    #[test]
    fn wasserstein_examples() {
        assert_eq!(wasserstein1(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
        let a = [0.3, -1.2, 4.0, 2.2];
        let shifted: Vec<f64> = a.iter().map(|v| v - 0.75).collect();
        assert!((wasserstein1(&a, &shifted).unwrap() - 0.75).abs() < 1e-15);
        assert!(wasserstein1(&a, &[1.0]).is_err());
    }
}
