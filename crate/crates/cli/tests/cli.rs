use std::path::Path;
use std::process::{Command, Output};

fn fdrbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdrbayes"))
        .args(args)
        .env_remove("FDRBAYES_THREADS")
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

/// Drops the `runtime_ms` column so outputs can be compared across runs.
fn without_runtime(lines: &[String]) -> Vec<String> {
    lines
        .iter()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(6);
            f.join(",")
        })
        .collect()
}

#[test]
fn selftest_passes() {
    let out = fdrbayes(&["selftest"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn run_is_reproducible_and_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--n=60".into(),
            "--d=40".into(),
            "--K=19".into(),
            "--seeds=2".into(),
            "--alpha-grid=0.2:0.4:0.2".into(),
            "--claimed-sigma=0.5".into(),
            "--threads=1".into(),
            format!("--out={}", out.display()),
        ]
    };
    for out in [&a, &b] {
        let argv = args(out);
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let res = fdrbayes(&argv);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let (ra, rb) = (read(&a), read(&b));
    assert_eq!(ra[0], "procedure,alpha,seed,fdp,tpp,rejections,runtime_ms,model");
    assert_eq!(ra.len(), 1 + 2 * 2);
    assert!(ra[1..].iter().all(|l| l.ends_with(",misspecified_sigma")));
    assert_eq!(without_runtime(&ra), without_runtime(&rb));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["config"]["K"], 19);
    assert_eq!(manifest["config"]["claimed_sigma"], 0.5);
    assert_eq!(manifest["results"]["rows"].as_array().unwrap().len(), 4);
    assert!(manifest["results"]["tau_star"].as_f64().unwrap() > 0.0);
}

#[test]
fn tiny_level_rejects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let res = fdrbayes(&[
        "run",
        "--n=40",
        "--d=30",
        "--K=19",
        "--seeds=1",
        "--alpha-grid=0.01:0.01:0.01",
        &format!("--out={}", out.display()),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let row = read(&out)[1].clone();
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!((f[3], f[4], f[5]), ("0", "0", "0"));
}

#[test]
fn tradeoff_analytic_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let res = fdrbayes(&["tradeoff", "--n=200", "--d=250", "--seeds=1", &format!("--out={}", out.display())]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = read(&out);
    assert_eq!(lines[0], "procedure,seed,cutoff,fdp,tpp,fdp_pred,tpp_pred");
    let end = lines.iter().find(|l| l.starts_with("tpop,1,1,")).expect("row at t = 1");
    let f: Vec<f64> = end.split(',').skip(5).map(|v| v.parse().unwrap()).collect();
    assert!((f[0] - 0.6).abs() < 1e-9 && (f[1] - 1.0).abs() < 1e-9, "{end}");
}

#[test]
fn formalism_rows_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "which = \"local_fdr\"\nns = [50, 100]\nseeds = 5\ndelta = 0.8\n").unwrap();
    let res = fdrbayes(&[
        "verify-formalism",
        &format!("--config={}", cfg.display()),
        "--seeds=2",
        &format!("--out={}", out.display()),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = read(&out);
    assert_eq!(lines[0], "which,n,seed,w1");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(lines[1..].iter().all(|l| l.starts_with("local_fdr,")));
}

#[test]
fn invalid_config_gives_machine_readable_error() {
    let res = fdrbayes(&["run", "--method=bogus"]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert_eq!(err["kind"], "config");
    assert_eq!(err["field"], "method");

    let res = fdrbayes(&["tradeoff", "--prior=0:0.5,1:0.4"]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["field"], "prior");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub/t.csv");
    let res = fdrbayes(&["tradeoff", "--n=50", "--d=40", "--seeds=1", &format!("--out={}", out.display())]);
    assert_eq!(res.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(err["kind"], "io");
    assert!(err["message"].as_str().unwrap().contains("creating"));
}
