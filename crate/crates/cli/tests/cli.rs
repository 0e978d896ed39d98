use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn episir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_episir"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = episir(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    episir(dir, args).status.code().expect("exit code")
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&read(path)).unwrap()
}

fn csv_rows(path: PathBuf) -> usize {
    String::from_utf8(read(path)).unwrap().lines().count() - 1
}

/// A short fit shared by the forecast and diagnose tests.
fn fitted() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        ok(dir.path(), &["simulate", "scn1", "--seed", "7", "--out", "sim"]);
        ok(
            dir.path(),
            &[
                "fit", "--data", "sim/dataset.json", "--chains", "1", "--iters", "2000", "--burn-in", "1000",
                "--thin", "10", "--out", "fit",
            ],
        );
        dir
    })
    .path()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "scn1", "--seed", "7", "--out", "a"]);
    ok(d, &["simulate", "scn1", "--seed", "7", "--out", "b"]);
    for f in ["dataset.json", "truth.csv"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
    ok(d, &["simulate", "scn1", "--seed", "8", "--out", "c"]);
    assert_ne!(read(d.join("a/dataset.json")), read(d.join("c/dataset.json")));
}

#[test]
fn simulate_scn3_has_eighty_days() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "scn3", "--out", "s"]);
    let data = json(dir.path().join("s/dataset.json"));
    assert_eq!(data["cases"].as_array().unwrap().len(), 80);
    assert_eq!(csv_rows(dir.path().join("s/truth.csv")), 80);
}

#[test]
fn stochastic_simulation_writes_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "scn2", "--stochastic", "--out", "s"]);
    assert_eq!(csv_rows(dir.path().join("s/truth.csv")), 80);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["simulate", "scn9"]), 2);
    assert_eq!(code(d, &["fit", "--data", "missing.json"]), 2);
    assert_eq!(code(d, &["simulate", "scn1", "--gamma-sd", "-1"]), 2);
    assert_eq!(code(d, &["no-such-command"]), 2);
    std::fs::write(d.join("bad.conf"), "horizn = 3\n").unwrap();
    assert_eq!(code(d, &["simulate", "scn1", "--config", "bad.conf"]), 2);
    std::fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(code(d, &["diagnose", "--draws", "empty.csv"]), 2);
}

#[test]
fn fit_smoke_run_writes_everything() {
    let d = fitted();
    let summary = json(d.join("fit/summary.json"));
    assert_eq!(summary["posterior"]["n_draws"], 100);
    assert_eq!(csv_rows(d.join("fit/draws.csv")), 100);
    assert_eq!(csv_rows(d.join("fit/re_band.csv")), 80);
    assert!(d.join("fit/prior.conf").exists());
    let manifest = json(d.join("fit/manifest.json"));
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["inputs"][0]["path"], "sim/dataset.json");
}

#[test]
fn fit_train_until_keeps_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "scn1", "--out", "sim"]);
    ok(
        d,
        &[
            "fit", "--data", "sim/dataset.json", "--train-until", "59", "--chains", "1", "--iters", "300", "--burn-in",
            "100", "--thin", "10", "--out", "fit",
        ],
    );
    assert_eq!(json(d.join("fit/dataset.json"))["cases"].as_array().unwrap().len(), 60);
    assert_eq!(json(d.join("fit/holdout.json"))["cases"].as_array().unwrap().len(), 20);
    ok(d, &["forecast", "--draws", "fit/draws.csv", "--horizon", "20", "--holdout", "fit/holdout.json", "--out", "fc"]);
    let report = json(d.join("fc/forecast.json"));
    assert_eq!(report["holdout"]["days_compared"], 20);
}

#[test]
fn forecast_defaults_and_determinism() {
    let d = fitted();
    ok(d, &["forecast", "--draws", "fit/draws.csv", "--seed", "3", "--out", "fa"]);
    ok(d, &["forecast", "--draws", "fit/draws.csv", "--seed", "3", "--out", "fb", "--threads", "2"]);
    assert_eq!(csv_rows(d.join("fa/forecast_cases.csv")), 30);
    for f in ["forecast_cases.csv", "forecast_re.csv"] {
        assert_eq!(read(d.join("fa").join(f)), read(d.join("fb").join(f)), "{f}");
    }
    assert_eq!(code(d, &["forecast", "--draws", "fit/draws.csv", "--horizon", "0"]), 2);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let d = fitted();
    std::fs::write(d.join("h.conf"), "horizon = 5\n").unwrap();
    ok(d, &["forecast", "--draws", "fit/draws.csv", "--config", "h.conf", "--out", "c1"]);
    ok(d, &["forecast", "--draws", "fit/draws.csv", "--config", "h.conf", "--horizon", "7", "--out", "c2"]);
    assert_eq!(csv_rows(d.join("c1/forecast_cases.csv")), 5);
    assert_eq!(csv_rows(d.join("c2/forecast_cases.csv")), 7);
}

#[test]
fn diagnose_reports_geweke_and_fit() {
    let d = fitted();
    ok(d, &["diagnose", "--draws", "fit/draws.csv", "--out", "dg"]);
    let table = String::from_utf8(read(d.join("dg/geweke.csv"))).unwrap();
    for p in ["i_u0", "eta_0", "r0", "rho"] {
        assert!(table.lines().any(|l| l.starts_with(&format!("{p},"))), "{p}");
    }
    let chi2 = json(d.join("dg/chi2.json"));
    let p = chi2["exceed_proportion"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!((chi2["threshold"].as_f64().unwrap() - 9.4877).abs() < 1e-3);
    assert_eq!(csv_rows(d.join("dg/qq.csv")), 100);
}

#[test]
fn identifiability_demo_matches_observations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["demo-identifiability", "--out", "a"]);
    ok(d, &["demo-identifiability", "--out", "b"]);
    let report = json(d.join("a/identifiability.json"));
    assert!(report["max_relative_case_mismatch"].as_f64().unwrap() < 1e-9);
    assert!(report["max_re_gap"].as_f64().unwrap() > 0.1);
    assert_eq!(read(d.join("a/identifiability.csv")), read(d.join("b/identifiability.csv")));
}

#[test]
fn replay_reproduces_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "scn2", "--seed", "2", "--out", "sim"]);
    std::fs::write(d.join("s.conf"), "thin = 5\nlink = probit\n").unwrap();
    ok(
        d,
        &[
            "fit", "--data", "sim/dataset.json", "--config", "s.conf", "--chains", "2", "--iters", "300", "--burn-in",
            "100", "--out", "fit",
        ],
    );
    assert!(String::from_utf8(read(d.join("fit/prior.conf"))).unwrap().contains("link = probit"));
    ok(d, &["replay", "fit/manifest.json", "--out", "again"]);
    for f in ["draws.csv", "summary.json", "re_band.csv"] {
        assert_eq!(read(d.join("fit").join(f)), read(d.join("again").join(f)), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_draws() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "scn1", "--out", "sim"]);
    let fit = |threads: &str, out: &str| {
        ok(
            d,
            &[
                "fit", "--data", "sim/dataset.json", "--chains", "3", "--iters", "300", "--burn-in", "100", "--thin",
                "5", "--threads", threads, "--out", out,
            ],
        )
    };
    fit("1", "t1");
    fit("3", "t3");
    assert_eq!(read(d.join("t1/draws.csv")), read(d.join("t3/draws.csv")));
}

#[test]
fn ingest_bundled_example() {
    let dir = tempfile::tempdir().unwrap();
    let csv = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/example_cumulative.csv");
    ok(
        dir.path(),
        &["ingest", "--csv", csv.to_str().unwrap(), "--region", "Example", "--population", "2000000", "--out", "ing"],
    );
    let data = json(dir.path().join("ing/dataset.json"));
    assert!(data["i_d0"].as_f64().unwrap() >= 100.0);
    assert!(!data["cases"].as_array().unwrap().is_empty());
}
