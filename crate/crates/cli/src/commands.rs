use crate::config::{
    config_error, load_file, parse_alpha_grid, parse_ns, parse_seeds, CommonArgs, FileConfig, FormalismArgs, RunArgs,
    SeedSpec,
};
use anyhow::Context;
use fdrbayes::amp::AmpOptions;
use fdrbayes::asymptotics::solve_tau_star;
use fdrbayes::datagen::sample_instance;
use fdrbayes::experiments::{
    covariates_for, log_log_slope, run_procedure, tradeoff as tradeoff_rows, verify_formalism as formalism_rows,
    FormalismConfig, FormalismRow, RunConfig, RunRow, Statistic, TradeoffConfig, TradeoffRow,
};
use fdrbayes::modelx::ebh;
use fdrbayes::procedures::{crt_pvalues, EmpiricalBayesConfig, Method, ProcedureConfig};
use fdrbayes::select::cpop;
use fdrbayes::{DiscretePrior, ScalarChannel};
use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

const DEFAULT_PRIOR: &str = "0:0.6,1:0.2,-1:0.2";
const DEFAULT_SIGMA: f64 = 0.25;

#[derive(Debug, Clone, Serialize)]
struct Common {
    prior: DiscretePrior,
    n: usize,
    d: usize,
    sigma: f64,
    seeds: Vec<u64>,
    threads: Option<usize>,
    out: PathBuf,
}

impl Common {
    fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    fn delta(&self) -> f64 {
        self.n as f64 / self.d as f64
    }
}

fn parse_prior(field: &'static str, literal: &str) -> anyhow::Result<DiscretePrior> {
    literal.parse().map_err(|e| config_error(field, format!("{e}")))
}

fn positive(field: &'static str, v: f64) -> anyhow::Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(field, format!("must be positive, got {v}")))
    }
}

fn resolve(args: &CommonArgs, file: &FileConfig, default_n: usize, default_d: usize, default_out: &str) -> anyhow::Result<Common> {
    let prior = parse_prior("prior", args.prior.as_deref().or(file.prior.as_deref()).unwrap_or(DEFAULT_PRIOR))?;
    let n = args.n.or(file.n).unwrap_or(default_n);
    if n == 0 {
        return Err(config_error("n", "must be positive"));
    }
    let d = match (args.d.or(file.d), args.delta.or(file.delta)) {
        (Some(d), _) => d,
        (None, Some(delta)) => covariates_for(n, positive("delta", delta)?),
        (None, None) => default_d,
    };
    if d < 2 {
        return Err(config_error("d", format!("must be at least 2, got {d}")));
    }
    let sigma = positive("sigma", args.sigma.or(file.sigma).unwrap_or(DEFAULT_SIGMA))?;
    let seeds = match (&args.seeds, &file.seeds) {
        (Some(s), _) => parse_seeds(&SeedSpec::Text(s.clone()))?,
        (None, Some(s)) => parse_seeds(s)?,
        (None, None) => (1..=10).collect(),
    };
    let threads = args.threads.or(file.threads);
    if threads == Some(0) {
        return Err(config_error("threads", "must be positive"));
    }
    let out = args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| default_out.into());
    Ok(Common { prior, n, d, sigma, seeds, threads, out })
}

fn init_threads(threads: Option<usize>) -> anyhow::Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("building the worker pool")?;
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_csv(out: &Path, header: &str, lines: impl Iterator<Item = String>) -> anyhow::Result<()> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = std::fs::File::create(out).with_context(|| format!("writing {}", out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush().with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn write_manifest(out: &Path, command: &str, config: Value, extra: Value, start: Instant) -> anyhow::Result<()> {
    let path = manifest_path(out);
    let manifest = json!({
        "status": "ok",
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "output": out,
        "runtime_ms": start.elapsed().as_secs_f64() * 1e3,
        "results": extra,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn tradeoff(args: &CommonArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let file = load_file(args.config.as_deref())?;
    let common = resolve(args, &file, 2000, 2500, "tradeoff.csv")?;
    init_threads(common.threads)?;
    let cfg = TradeoffConfig::new(common.prior.clone(), common.n, common.d, common.sigma2(), common.seeds.clone());
    let cal = solve_tau_star(&cfg.prior, common.delta(), cfg.sigma2)?;
    let rows = tradeoff_rows(&cfg)?;
    write_csv(&common.out, TradeoffRow::HEADER, rows.iter().map(TradeoffRow::csv))?;
    write_manifest(
        &common.out,
        "tradeoff",
        serde_json::to_value(&cfg)?,
        json!({ "delta": common.delta(), "tau_star": cal.tau_star, "rows": rows.len() }),
        start,
    )?;
    println!("wrote {} rows to {}", rows.len(), common.out.display());
    Ok(())
}

fn model_tag(data: &DiscretePrior, claimed: &DiscretePrior, sigma: f64, claimed_sigma: f64) -> String {
    match (data == claimed, sigma == claimed_sigma) {
        (true, true) => "well_specified",
        (true, false) => "misspecified_sigma",
        (false, true) => "misspecified_prior",
        (false, false) => "misspecified",
    }
    .into()
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let file = load_file(args.common.config.as_deref())?;
    let common = resolve(&args.common, &file, 500, 400, "run.csv")?;
    let claimed = match args.claimed_prior.as_deref().or(file.claimed_prior.as_deref()) {
        Some(lit) => parse_prior("claimed_prior", lit)?,
        None => common.prior.clone(),
    };
    let claimed_sigma = positive("claimed_sigma", args.claimed_sigma.or(file.claimed_sigma).unwrap_or(common.sigma))?;
    let alphas = parse_alpha_grid(args.alpha_grid.as_deref().or(file.alpha_grid.as_deref()).unwrap_or("0.1:0.6:0.1"))?;
    let eps_frac = args.eps_frac.or(file.eps_frac).unwrap_or(0.1);
    if !(0.0..1.0).contains(&eps_frac) {
        return Err(config_error("eps_frac", format!("must lie in [0, 1), got {eps_frac}")));
    }
    let k = args.k.or(file.k).unwrap_or(1000);
    let m = args.m.or(file.m).unwrap_or(50);
    let ridge_lambda = args.ridge_lambda.or(file.ridge_lambda).unwrap_or(0.1);
    let method_name = args.method.as_deref().or(file.method.as_deref()).unwrap_or("poedce");
    let method = match method_name {
        "popce" => Method::Popce,
        "poedce" => Method::Poedce,
        "epoedce" => {
            if !(2..=common.d).contains(&m) {
                return Err(config_error("M", format!("must lie in [2, d={}], got {m}", common.d)));
            }
            positive("ridge_lambda", ridge_lambda)?;
            let pi0 = claimed.null_weight();
            if !(pi0 > 0.0 && pi0 < 1.0) {
                return Err(config_error("claimed_prior", format!("null weight must lie in (0, 1), got {pi0}")));
            }
            Method::Epoedce(EmpiricalBayesConfig { m, ridge_lambda, pi0, sigma2: claimed_sigma * claimed_sigma })
        }
        other => return Err(config_error("method", format!("expected popce, poedce or epoedce, got `{other}`"))),
    };
    let model = args
        .model
        .clone()
        .or_else(|| file.model.clone())
        .unwrap_or_else(|| model_tag(&common.prior, &claimed, common.sigma, claimed_sigma));
    if model.contains(',') || model.contains('\n') {
        return Err(config_error("model", "must not contain commas or newlines"));
    }
    let mut procedure = ProcedureConfig::new(alphas[0], claimed.clone(), claimed_sigma * claimed_sigma);
    procedure.k = k;
    for &alpha in &alphas {
        let mut p = procedure.clone();
        p.alpha = alpha;
        p.eps = eps_frac * alpha;
        p.validate()?;
    }
    init_threads(common.threads)?;

    let cfg = RunConfig {
        method,
        data_prior: common.prior.clone(),
        n: common.n,
        d: common.d,
        sigma2: common.sigma2(),
        seeds: common.seeds.clone(),
        alphas: alphas.clone(),
        eps_frac,
        procedure,
        model: model.clone(),
    };
    let rows = run_procedure(&cfg)?;
    write_csv(&common.out, RunRow::HEADER, rows.iter().map(RunRow::csv))?;
    let tau_star = match method {
        Method::Epoedce(_) => None,
        _ => Some(solve_tau_star(&claimed, common.delta(), claimed_sigma * claimed_sigma)?.tau_star),
    };
    let config = json!({
        "method": method_name,
        "data_prior": common.prior,
        "claimed_prior": claimed,
        "n": common.n,
        "d": common.d,
        "sigma": common.sigma,
        "claimed_sigma": claimed_sigma,
        "seeds": common.seeds,
        "alphas": alphas,
        "eps_frac": eps_frac,
        "K": k,
        "M": matches!(method, Method::Epoedce(_)).then_some(m),
        "ridge_lambda": matches!(method, Method::Epoedce(_)).then_some(ridge_lambda),
        "amp": cfg.procedure.amp,
        "model": model,
        "threads": common.threads,
    });
    write_manifest(&common.out, "run", config, json!({ "tau_star": tau_star, "rows": rows }), start)?;
    println!("wrote {} rows to {}", rows.len(), common.out.display());
    Ok(())
}

pub fn verify_formalism(args: &FormalismArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let file = load_file(args.common.config.as_deref())?;
    let common = resolve(&args.common, &file, 250, 200, "formalism.csv")?;
    let which: Statistic = args
        .which
        .as_deref()
        .or(file.which.as_deref())
        .unwrap_or("posterior_mean")
        .parse()
        .map_err(|e| config_error("which", format!("{e}")))?;
    let ns = match (&args.ns, &file.ns) {
        (Some(s), _) => parse_ns(s)?,
        (None, Some(v)) if !v.is_empty() && !v.contains(&0) => v.clone(),
        (None, Some(_)) => return Err(config_error("ns", "sample sizes must be positive")),
        (None, None) => vec![250, 500, 1000, 2000],
    };
    let delta = positive("delta", args.common.delta.or(file.delta).unwrap_or(1.25))?;
    let k = args.k.or(file.k).unwrap_or(1000);
    if k == 0 {
        return Err(config_error("K", "at least one resample is required"));
    }
    init_threads(common.threads)?;
    let cfg = FormalismConfig {
        which,
        prior: common.prior.clone(),
        delta,
        sigma2: common.sigma2(),
        ns: ns.clone(),
        seeds: common.seeds.clone(),
        k,
        amp: AmpOptions::default(),
    };
    let rows = formalism_rows(&cfg)?;
    write_csv(&common.out, FormalismRow::HEADER, rows.iter().map(FormalismRow::csv))?;
    let slope = log_log_slope(&rows);
    let means: Vec<Value> = ns
        .iter()
        .map(|&n| {
            let w: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.w1).collect();
            json!({ "n": n, "mean_w1": w.iter().sum::<f64>() / w.len() as f64 })
        })
        .collect();
    let config = json!({
        "which": which,
        "prior": common.prior,
        "delta": delta,
        "sigma": common.sigma,
        "ns": ns,
        "seeds": common.seeds,
        "K": k,
        "amp": cfg.amp,
    });
    let tau_star = solve_tau_star(&common.prior, delta, common.sigma2())?.tau_star;
    write_manifest(
        &common.out,
        "verify-formalism",
        config,
        json!({ "tau_star": tau_star, "log_log_slope": slope, "mean_w1": means }),
        start,
    )?;
    println!("wrote {} rows to {}; log-log slope {slope:.3}", rows.len(), common.out.display());
    Ok(())
}

fn check(name: &str, pass: bool, detail: String, results: &mut Vec<Value>) {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    results.push(json!({ "check": name, "pass": pass, "detail": detail }));
}

pub fn selftest(args: &CommonArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let file = load_file(args.config.as_deref())?;
    let common = resolve(args, &file, 60, 40, "selftest.csv")?;
    init_threads(common.threads)?;
    let prior = &common.prior;
    let mut results = Vec::new();

    let mut worst = 0.0f64;
    for i in 0..200 {
        let y = -3.0 + 6.0 * i as f64 / 199.0;
        for tau in [0.2, 0.5, 1.0, 2.0] {
            let ch = ScalarChannel::new(prior, tau)?;
            let w: Vec<f64> = prior
                .atoms()
                .iter()
                .map(|a| a.weight * (-(y - a.location).powi(2) / (2.0 * tau * tau)).exp())
                .collect();
            let z: f64 = w.iter().sum();
            let mean = prior.atoms().iter().zip(&w).map(|(a, w)| a.location * w).sum::<f64>() / z;
            worst = worst.max((ch.posterior_mean(y) - mean).abs());
        }
    }
    check("posterior_mean", worst < 1e-12, format!("max deviation from Bayes rule {worst:.2e}"), &mut results);

    let cal = solve_tau_star(prior, common.delta(), common.sigma2())?;
    let residual = cal.residual().abs();
    check("fixed_point", residual < 1e-8, format!("tau* = {:.6}, residual {residual:.2e}", cal.tau_star), &mut results);

    let k_hat = cpop(&[0.9, 0.1, 0.5], 1.0, 1.0)?.k_hat;
    check("cpop", k_hat == Some(2), format!("K_hat = {k_hat:?} on (0.9, 0.1, 0.5)"), &mut results);

    let sel = ebh(&[10.0, 4.0, 2.0, 1.0, 0.0], 3.0, 0.5);
    check("ebh", sel == [0, 1, 2], format!("rejected {sel:?}"), &mut results);

    let inst = sample_instance(prior, common.n, common.d, common.sigma2(), common.seeds[0])?;
    let mut cfg = ProcedureConfig::new(0.2, prior.clone(), common.sigma2());
    cfg.k = 19;
    let a = crt_pvalues(&inst.x, &inst.y, Method::Poedce, &cfg)?;
    let b = crt_pvalues(&inst.x, &inst.y, Method::Poedce, &cfg)?;
    check("determinism", a.p == b.p && a.u == b.u, format!("two poedce runs at n={}, d={}", common.n, common.d), &mut results);

    let passed = results.iter().all(|r| r["pass"] == true);
    if args.out.is_some() || file.out.is_some() {
        write_manifest(&common.out, "selftest", serde_json::to_value(&common)?, json!(results), start)?;
    }
    if passed {
        Ok(())
    } else {
        anyhow::bail!("selftest failed")
    }
}
