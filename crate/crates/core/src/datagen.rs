//! Sampling from the isotropic Bayesian linear model.
//!
//! Every random quantity is drawn from its own ChaCha stream whose seed is a
//! mix of the master seed, a fixed stream label and up to two counters, so
//! results never depend on the order in which streams are consumed.

use crate::error::{invalid, Error, Result};
use crate::prior::DiscretePrior;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Stream labels mixed into derived seeds.
pub mod label {
    pub const DESIGN: u64 = 0x4445_5349_474e;
    pub const COEFFICIENTS: u64 = 0x4245_5441;
    pub const NOISE: u64 = 0x4e4f_4953_45;
    pub const RESAMPLE: u64 = 0x5245_5341_4d50;
    pub const LIMIT_LAW: u64 = 0x4c49_4d49_54;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed for the stream `(master, label, a, b)`.
pub fn derive_seed(master: u64, label: u64, a: u64, b: u64) -> u64 {
    [label, a, b]
        .into_iter()
        .fold(splitmix(master), |acc, v| splitmix(acc ^ splitmix(v)))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `k`-th resampled copy of column `j`.
pub fn column_seed(master: u64, j: usize, k: usize) -> u64 {
    derive_seed(master, label::RESAMPLE, j as u64, k as u64)
}

/// Draws from a discrete prior by inverting its cumulative weights.
pub fn sample_prior(prior: &DiscretePrior, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for a in prior.atoms() {
        acc += a.weight;
        if u < acc {
            return a.location;
        }
    }
    prior.atoms().last().expect("non-empty prior").location
}

#[derive(Debug, Clone)]
pub struct LinearModelInstance {
    /// `n x d`, entries `N(0, 1/n)`.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta0: DVector<f64>,
    pub sigma2: f64,
    pub prior: DiscretePrior,
    pub seed: u64,
}

impl LinearModelInstance {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn delta(&self) -> f64 {
        self.n() as f64 / self.d() as f64
    }

    pub fn is_null(&self, j: usize) -> bool {
        self.beta0[j] == 0.0
    }

    /// Writes `X.csv` (row-major, one row per line), `Y.csv` and `beta0.csv` into `dir`.
    pub fn dump_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("X.csv"))?);
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.d()).map(|j| self.x[(i, j)].to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        write_column(&dir.join("Y.csv"), self.y.as_slice())?;
        write_column(&dir.join("beta0.csv"), self.beta0.as_slice())?;
        Ok(())
    }
}

fn write_column(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Parse(format!("{}:{}: bad number `{v}`", path.display(), i + 1))
                    })
                })
                .collect()
        })
        .collect()
}

/// Data read back from [`LinearModelInstance::dump_csv`].
#[derive(Debug, Clone)]
pub struct InstanceData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta0: DVector<f64>,
}

pub fn load_csv(dir: &Path) -> Result<InstanceData> {
    let rows = parse_rows(&dir.join("X.csv"))?;
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged X.csv".into()));
    }
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let single = |name: &str| -> Result<DVector<f64>> {
        let rows = parse_rows(&dir.join(name))?;
        if rows.iter().any(|r| r.len() != 1) {
            return Err(Error::Dimension(format!("{name} must have one column")));
        }
        Ok(DVector::from_iterator(rows.len(), rows.into_iter().map(|r| r[0])))
    };
    let y = single("Y.csv")?;
    let beta0 = single("beta0.csv")?;
    if y.len() != n || beta0.len() != d {
        return Err(Error::Dimension(format!(
            "X is {n}x{d} but Y has {} rows and beta0 {}",
            y.len(),
            beta0.len()
        )));
    }
    Ok(InstanceData { x, y, beta0 })
}

/// `X_ij ~ N(0, 1/n)`, `beta0_j ~ prior`, `Y = X beta0 + N(0, sigma2 I)`.
pub fn sample_instance(prior: &DiscretePrior, n: usize, d: usize, sigma2: f64, seed: u64) -> Result<LinearModelInstance> {
    if n == 0 || d == 0 {
        return Err(invalid("n, d", format!("must be positive, got n={n}, d={d}")));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = stream(derive_seed(seed, label::DESIGN, 0, 0));
    let entries: Vec<f64> = (0..n * d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x = DMatrix::from_vec(n, d, entries);

    let mut rng = stream(derive_seed(seed, label::COEFFICIENTS, 0, 0));
    let beta0 = DVector::from_fn(d, |_, _| sample_prior(prior, &mut rng));

    let mut rng = stream(derive_seed(seed, label::NOISE, 0, 0));
    let sd = sigma2.sqrt();
    let noise = DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    let y = &x * &beta0 + noise;

    Ok(LinearModelInstance {
        x,
        y,
        beta0,
        sigma2,
        prior: prior.clone(),
        seed,
    })
}

/// Fresh `N(0, 1/n)^n` column drawn from the stream `stream_seed`.
pub fn resample_column(n: usize, stream_seed: u64) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    fill_resampled(out.as_mut_slice(), stream_seed);
    out
}

/// In-place variant of [`resample_column`].
pub fn fill_resampled(out: &mut [f64], stream_seed: u64) {
    let scale = 1.0 / (out.len() as f64).sqrt();
    let mut rng = stream(stream_seed);
    for v in out.iter_mut() {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior() -> DiscretePrior {
        "0:0.6,1:0.2,-1:0.2".parse().unwrap()
    }

    #[test]
    fn columns_have_unit_norm_on_average() {
        let n = 400;
        let inst = sample_instance(&prior(), n, 300, 0.0625, 11).unwrap();
        let mean: f64 = inst.x.column_iter().map(|c| c.norm_squared()).sum::<f64>() / 300.0;
        assert!((mean - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn null_fraction_concentrates() {
        let d = 5000;
        let inst = sample_instance(&prior(), 10, d, 0.0625, 3).unwrap();
        let frac = (0..d).filter(|&j| inst.is_null(j)).count() as f64 / d as f64;
        assert!((frac - 0.6).abs() < 3.0 * (0.24 / d as f64).sqrt());
        assert!(inst.beta0.iter().all(|b| [-1.0, 0.0, 1.0].contains(b)));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = sample_instance(&prior(), 50, 40, 0.0625, 99).unwrap();
        let b = sample_instance(&prior(), 50, 40, 0.0625, 99).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        assert_eq!(a.beta0, b.beta0);
        let c = sample_instance(&prior(), 50, 40, 0.0625, 100).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn resampled_columns_have_the_conditional_law() {
        let n = 1000;
        // pooled over 10 columns the chi-square relative sd is sqrt(2/1e4) ~ 0.014
        let ss: f64 = (0..10).map(|k| resample_column(n, column_seed(5, 0, k)).norm_squared()).sum();
        let var = ss / 1e4;
        assert!((var * n as f64 - 1.0).abs() < 0.05);
        let many: f64 = (0..10).map(|k| resample_column(n, column_seed(5, 1, k)).sum()).sum::<f64>();
        assert!((many / 1e4).abs() < 3.0 / (1e4 * n as f64).sqrt());
        assert_ne!(resample_column(n, column_seed(5, 0, 0)), resample_column(n, column_seed(5, 0, 1)));
        assert_ne!(column_seed(5, 1, 2), column_seed(5, 2, 1));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let inst = sample_instance(&prior(), 7, 5, 0.0625, 1).unwrap();
        let dir = std::env::temp_dir().join(format!("fdrbayes-dump-{}", std::process::id()));
        inst.dump_csv(&dir).unwrap();
        let back = load_csv(&dir).unwrap();
        assert_eq!(back.x, inst.x);
        assert_eq!(back.y, inst.y);
        assert_eq!(back.beta0, inst.beta0);
        fs::remove_dir_all(&dir).unwrap();
    }
}
