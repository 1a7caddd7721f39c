//! Command-line flags, the optional TOML config file, and their merge.

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "fdrbayes", version, about = "FDR-controlling selection in Bayesian linear models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical and predicted FDP/TPP curves of TPoP and thresholded LASSO.
    Tradeoff(CommonArgs),
    /// Run a CRT procedure over a grid of target levels.
    Run(RunArgs),
    /// Wasserstein distance between a statistic and its scalar-channel limit.
    VerifyFormalism(FormalismArgs),
    /// Quick numerical self-checks.
    Selftest(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with default values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prior literal, e.g. "0:0.6,1:0.2,-1:0.2".
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Aspect ratio n/d; used when --d is absent.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// A count `N` (seeds 1..=N), a range `a:b`, or a list `s1,s2,...`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, env = "FDRBAYES_THREADS")]
    pub threads: Option<usize>,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// popce, poedce or epoedce.
    #[arg(long)]
    pub method: Option<String>,
    /// `lo:hi:step`, inclusive.
    #[arg(long = "alpha-grid")]
    pub alpha_grid: Option<String>,
    #[arg(long = "eps-frac")]
    pub eps_frac: Option<f64>,
    /// CRT resamples per hypothesis.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Covariate blocks for epoedce.
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Prior the procedure assumes; defaults to --prior.
    #[arg(long = "claimed-prior")]
    pub claimed_prior: Option<String>,
    /// Noise level the procedure assumes; defaults to --sigma.
    #[arg(long = "claimed-sigma")]
    pub claimed_sigma: Option<f64>,
    #[arg(long = "ridge-lambda")]
    pub ridge_lambda: Option<f64>,
    /// Tag written in the `model` column; derived from the claims when absent.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FormalismArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// posterior_mean, local_fdr, popce_pvalues or poedce_pvalues.
    #[arg(long)]
    pub which: Option<String>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    pub ns: Option<String>,
    #[arg(long = "K")]
    pub k: Option<usize>,
}

/// Values read from `--config`. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub prior: Option<String>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    pub seeds: Option<SeedSpec>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub method: Option<String>,
    pub alpha_grid: Option<String>,
    pub eps_frac: Option<f64>,
    #[serde(alias = "K")]
    pub k: Option<usize>,
    #[serde(alias = "M")]
    pub m: Option<usize>,
    pub claimed_prior: Option<String>,
    pub claimed_sigma: Option<f64>,
    pub ridge_lambda: Option<f64>,
    pub model: Option<String>,
    pub which: Option<String>,
    pub ns: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
    Text(String),
}

/// A rejected configuration value.
#[derive(Debug)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(field: &'static str, reason: impl Into<String>) -> anyhow::Error {
    ConfigError { field, reason: reason.into() }.into()
}

pub fn load_file(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::Error::new(e).context(format!("reading config {}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_error("config", format!("{}: {e}", path.display())))
}

pub fn parse_seeds(spec: &SeedSpec) -> anyhow::Result<Vec<u64>> {
    let seeds = match spec {
        SeedSpec::Count(n) => (1..=*n).collect(),
        SeedSpec::List(v) => v.clone(),
        SeedSpec::Text(s) => parse_seed_text(s)?,
    };
    if seeds.is_empty() {
        return Err(config_error("seeds", "at least one seed is required"));
    }
    Ok(seeds)
}

fn parse_seed_text(s: &str) -> anyhow::Result<Vec<u64>> {
    let bad = |_| config_error("seeds", format!("cannot parse `{s}`"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once(':') {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        if b < a {
            return Err(config_error("seeds", format!("empty range `{s}`")));
        }
        Ok((a..=b).collect())
    } else if s.contains(',') {
        s.split(',').map(|t| t.trim().parse().map_err(bad)).collect()
    } else {
        let n: u64 = s.parse().map_err(bad)?;
        Ok((1..=n).collect())
    }
}

/// `lo:hi:step` to the inclusive grid `lo, lo + step, ...`.
pub fn parse_alpha_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let nums: Vec<f64> = match parts.as_slice() {
        [a, b, c] => [a, b, c]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| config_error("alpha_grid", format!("cannot parse `{s}`")))?,
        _ => return Err(config_error("alpha_grid", format!("expected lo:hi:step, got `{s}`"))),
    };
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(lo > 0.0 && hi < 1.0 && lo <= hi && step > 0.0) {
        return Err(config_error("alpha_grid", format!("need 0 < lo <= hi < 1 and step > 0, got `{s}`")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

pub fn parse_ns(s: &str) -> anyhow::Result<Vec<usize>> {
    let ns: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| config_error("ns", format!("cannot parse `{s}`")))?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(config_error("ns", "sample sizes must be positive"));
    }
    Ok(ns)
}
