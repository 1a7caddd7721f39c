//! Quadrature rules for expectations over a standard normal variable.
//!
//! A rule is a set of nodes and weights summing to one, so that
//! `sum_k w_k f(z_k)` approximates `E[f(Z)]` for `Z ~ N(0, 1)`.
//!
//! Gauss–Hermite rules are exact for polynomials but lose accuracy on the
//! log-sum-exp integrands of a discrete prior at small noise, where the
//! integrand bends on a scale of `tau / |b - b'|`. The default rule is the
//! Gaussian-weighted trapezoid rule on a fine uniform grid, which converges
//! geometrically for such analytic integrands.

use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::OnceLock;

pub const DEFAULT_ORDER: usize = 61;
/// Half-width of the default trapezoid grid in units of the standard deviation.
pub const TRAPEZOID_HALF_WIDTH: f64 = 12.0;
/// Nodes of the default trapezoid grid (spacing 0.005).
pub const TRAPEZOID_POINTS: usize = 4801;

#[derive(Debug, Clone)]
pub struct NormalRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl NormalRule {
    /// Probabilists' Gauss–Hermite rule via the Golub–Welsch eigenvalue method.
    pub fn gauss_hermite(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize to remove eigen-solver asymmetry in the tails.
        let n = pairs.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let z = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-z, w);
            pairs[j] = (z, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Trapezoid rule on `points` equispaced nodes over `[-half_width, half_width]`,
    /// weighted by the normal density and renormalized.
    pub fn trapezoid(half_width: f64, points: usize) -> Self {
        assert!(points >= 2 && half_width > 0.0, "degenerate trapezoid rule");
        let h = 2.0 * half_width / (points - 1) as f64;
        let nodes: Vec<f64> = (0..points).map(|i| -half_width + h * i as f64).collect();
        let raw: Vec<f64> = nodes.iter().map(|&z| (-0.5 * z * z).exp()).collect();
        let total: f64 = raw.iter().sum();
        Self {
            nodes,
            weights: raw.into_iter().map(|w| w / total).collect(),
        }
    }

    /// Shared default rule used by the scalar-channel expectations.
    pub fn standard() -> &'static NormalRule {
        static RULE: OnceLock<NormalRule> = OnceLock::new();
        RULE.get_or_init(|| NormalRule::trapezoid(TRAPEZOID_HALF_WIDTH, TRAPEZOID_POINTS))
    }

    /// Shared Gauss–Hermite rule of [`DEFAULT_ORDER`] nodes.
    pub fn hermite_default() -> &'static NormalRule {
        static RULE: OnceLock<NormalRule> = OnceLock::new();
        RULE.get_or_init(|| NormalRule::gauss_hermite(DEFAULT_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments_exactly() {
        let gh = NormalRule::hermite_default();
        assert_eq!(gh.order(), 61);
        assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(gh.expect(|z| z).abs() < 1e-14);
        assert!((gh.expect(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((gh.expect(|z| z.powi(4)) - 3.0).abs() < 1e-11);
        assert!((gh.expect(|z| z.powi(8)) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_expectation_matches_closed_form() {
        // E[cos(Z)] = exp(-1/2)
        let gh = NormalRule::gauss_hermite(31);
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_matches_moments_and_sharp_integrands() {
        let rule = NormalRule::standard();
        assert!((rule.expect(|z| z * z) - 1.0).abs() < 1e-13);
        assert!((rule.expect(|z| z.powi(4)) - 3.0).abs() < 1e-12);
        // E[max(Z, 0)] with a smoothed kink of width 0.02
        let eps = 0.02;
        let soft = rule.expect(|z| eps * (z / eps).exp().ln_1p().max(z / eps));
        let fine = NormalRule::trapezoid(12.0, 48001).expect(|z| eps * (z / eps).exp().ln_1p().max(z / eps));
        assert!((soft - fine).abs() < 1e-12);
    }
}
