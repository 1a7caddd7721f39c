//! Finite discrete priors `pi0 * delta_0 + (1 - pi0) * Pi_star`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Tolerance on the total mass of a constructed prior.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Tolerance accepted by the `location:weight` literal parser before renormalizing.
pub const LITERAL_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// A finite mixture of point masses with exactly one atom at zero.
///
/// Atoms are kept sorted by location. The degenerate prior `delta_0`
/// (null weight one, no other atoms) is allowed as the pure-null limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DiscretePrior {
    atoms: Vec<Atom>,
    null_index: usize,
    log_weights: Vec<f64>,
}

impl DiscretePrior {
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(location, weight)| Atom { location, weight })
            .collect();
        if atoms.is_empty() {
            return Err(Error::InvalidPrior("no atoms".into()));
        }
        for a in &atoms {
            if !a.location.is_finite() || !a.weight.is_finite() {
                return Err(Error::InvalidPrior(format!(
                    "non-finite atom {}:{}",
                    a.location, a.weight
                )));
            }
            if a.weight <= 0.0 {
                return Err(Error::InvalidPrior(format!(
                    "weight of atom at {} must be positive, got {}",
                    a.location, a.weight
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPrior(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        if atoms.windows(2).any(|w| w[0].location == w[1].location) {
            return Err(Error::InvalidPrior("duplicate atom locations".into()));
        }
        let zeros: Vec<usize> = atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.location == 0.0)
            .map(|(i, _)| i)
            .collect();
        let null_index = match zeros.as_slice() {
            [i] => *i,
            [] => return Err(Error::InvalidPrior("no atom at 0".into())),
            _ => unreachable!("duplicates rejected above"),
        };
        let log_weights = atoms.iter().map(|a| a.weight.ln()).collect();
        Ok(Self {
            atoms,
            null_index,
            log_weights,
        })
    }

    /// The pure-null prior `delta_0`.
    pub fn point_null() -> Self {
        Self::new([(0.0, 1.0)]).expect("valid")
    }

    /// `pi1 * delta_1 + pi0 * delta_0 + (1 - pi0 - pi1) * delta_{-1}`; atoms
    /// whose weight is zero are dropped.
    pub fn three_point(pi0: f64, pi1: f64) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 <= 1.0) || !(0.0..=1.0 - pi0 + MASS_TOLERANCE).contains(&pi1) {
            return Err(Error::InvalidPrior(format!(
                "three-point weights out of range: pi0={pi0}, pi1={pi1}"
            )));
        }
        let pi1 = pi1.min(1.0 - pi0);
        let pim1 = 1.0 - pi0 - pi1;
        let atoms = [(-1.0, pim1), (0.0, pi0), (1.0, pi1)]
            .into_iter()
            .filter(|&(_, w)| w > 0.0);
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub(crate) fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub(crate) fn null_index(&self) -> usize {
        self.null_index
    }

    /// Atoms other than the one at zero.
    pub fn nonnull_atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.atoms
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.null_index)
            .map(|(_, a)| a)
    }

    /// `pi0`, the weight of the atom at zero.
    pub fn null_weight(&self) -> f64 {
        self.atoms[self.null_index].weight
    }

    pub fn nonnull_weight(&self) -> f64 {
        self.nonnull_atoms().map(|a| a.weight).sum()
    }

    pub fn is_point_null(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.location.powi(2)).sum()
    }

    pub fn max_abs_location(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.location.abs())
            .fold(0.0, f64::max)
    }

    /// True when the prior is invariant under `b -> -b` (weights within 1e-12).
    pub fn is_symmetric(&self) -> bool {
        let n = self.atoms.len();
        (0..n).all(|i| {
            let a = self.atoms[i];
            let b = self.atoms[n - 1 - i];
            a.location == -b.location && (a.weight - b.weight).abs() <= MASS_TOLERANCE
        })
    }
}

impl fmt::Display for DiscretePrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|a| format!("{}:{}", a.location, a.weight))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `"0:0.6,1:0.2,-1:0.2"`. Weights must sum to one within
/// [`LITERAL_MASS_TOLERANCE`]; they are then renormalized exactly.
impl FromStr for DiscretePrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (loc, w) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidPrior(format!("expected location:weight, got `{item}`")))?;
            let loc: f64 = loc
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPrior(format!("bad location `{loc}`")))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPrior(format!("bad weight `{w}`")))?;
            pairs.push((loc, w));
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !((total - 1.0).abs() <= LITERAL_MASS_TOLERANCE) {
            return Err(Error::InvalidPrior(format!(
                "weights in `{s}` sum to {total}, expected 1"
            )));
        }
        Self::new(pairs.into_iter().map(|(l, w)| (l, w / total)))
    }
}

impl TryFrom<Vec<Atom>> for DiscretePrior {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms.into_iter().map(|a| (a.location, a.weight)))
    }
}

impl From<DiscretePrior> for Vec<Atom> {
    fn from(p: DiscretePrior) -> Self {
        p.atoms
    }
}
