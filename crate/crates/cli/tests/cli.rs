//! End-to-end runs of the binary against fixture files.
//!
//! Reports are compared with `tests/golden/*.json`; set `UPDATE_GOLDEN=1` to
//! rewrite them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cadlag-qv"));
    cmd.args(args).env_remove("CADLAG_QV_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn golden(name: &str, got: &Value) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(got).unwrap() + "\n").unwrap();
        return;
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(got, &want, "report differs from {}", path.display());
}

const T0: &str = "0.70710678";

#[test]
fn remark_values_per_level() {
    let remark = fixture("remark.csv");
    let q = run(&["qv", "compute", "--path", &remark, "--scheme", "dyadic", "--levels", "4..10", "--t", T0, "--mode", "q"]);
    assert_eq!(code(&q), 0);
    let lines: Vec<String> = (4..=10).map(|n| format!("{n} 1")).collect();
    assert_eq!(stdout(&q).lines().collect::<Vec<_>>(), lines);

    let p = run(&["qv", "compute", "--path", &remark, "--levels", "4..10", "--t", T0, "--mode", "p"]);
    assert!(stdout(&p).lines().all(|l| l.ends_with(" 0")));
    let s = run(&["qv", "compute", "--path", &remark, "--levels", "4..10", "--t", T0, "--mode", "s"]);
    assert!(stdout(&s).lines().all(|l| l.ends_with(" 1")));
}

#[test]
fn exit_codes() {
    let remark = fixture("remark.csv");
    let empty = run(&["qv", "compute", "--path", &remark, "--levels", "6..4"]);
    assert_eq!(code(&empty), 2);
    assert_eq!(code(&run(&["qv", "compute", "--path", &fixture("bad.csv"), "--levels", "4..6"])), 3);
    assert_eq!(code(&run(&["qv", "compute", "--path", &fixture("missing.csv"), "--levels", "4..6"])), 3);
    assert_eq!(code(&run(&["qv", "compute", "--path", &remark, "--levels", "4..6", "--scheme", "random"])), 2);
    assert_eq!(code(&run(&["qv", "compute", "--levels", "4..6"])), 2);
    assert_eq!(code(&run(&["qv", "frobnicate"])), 2);
    let seedless = run(&["mc", "run", "--model", "brownian", "--levels", "4..6", "--eps", "0.1"]);
    assert_eq!(code(&seedless), 2);
    let threads = run_env(&["qv", "compute", "--path", &remark, "--levels", "4..6"], &[("CADLAG_QV_THREADS", "zero")]);
    assert_eq!(code(&threads), 2);
}

#[test]
fn strict_turns_an_unsettled_limit_into_failure() {
    // at levels 4..10 the gaps still follow the binary digits of t0
    let args = ["qv", "limit", "--path", &fixture("remark.csv"), "--levels", "4..10"];
    let lax = run(&args);
    assert_eq!(json(&lax)["report"]["converged"], false);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&run(&strict)), 1);
    let mut finer = strict.clone();
    finer[5] = "4..14";
    let settled = run(&finer);
    assert_eq!(code(&settled), 0);
    let r = json(&settled);
    assert_eq!(r["report"]["mode"], "j1");
    assert_eq!(r["decomposition"]["jump_part"], serde_json::json!([[0.70710678, 1.0]]));
}

#[test]
fn plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let out = run(&[
        "qv", "limit", "--path", &fixture("remark.csv"), "--levels", "4..14", "--t", T0,
        "--plot", plot.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&plot).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("level,j1_distance,uniform_distance,value_at_t"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        let mesh = (-r[0]).exp2();
        assert!(r[1] <= 2.0 * mesh, "{r:?}");
        assert!(r[2] >= 1.0, "{r:?}");
        assert_eq!(r[3], 1.0);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("report.json");
    std::fs::write(
        &cfg,
        serde_json::json!({
            "path": fixture("remark.csv"),
            "levels": "4..6",
            "t": 0.70710678,
            "mode": "p",
            "out": out,
        })
        .to_string(),
    )
    .unwrap();
    let o = run(&["qv", "compute", "--config", cfg.to_str().unwrap(), "--levels", "8..9"]);
    assert_eq!(stdout(&o), "8 0\n9 0\n");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["levels"].as_array().unwrap().len(), 2);

    std::fs::write(&cfg, r#"{"levles": "4..6"}"#).unwrap();
    let typo = run(&["qv", "compute", "--config", cfg.to_str().unwrap(), "--path", &fixture("remark.csv")]);
    assert_eq!(code(&typo), 2);
}

#[test]
fn dist_report() {
    let o = run(&["dist", "--x", &fixture("a.csv"), "--y", &fixture("b.csv"), "--horizon", "1", "--oracle"]);
    let r = json(&o);
    assert!((r["distance"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    golden("dist.json", &r);
}

#[test]
fn matrix_report() {
    let r = json(&run(&["qv", "matrix", "--path", &fixture("vec.csv"), "--levels", "4..12"]));
    assert_eq!(r["limit_at_horizon"], serde_json::json!([[5.0, -1.0], [-1.0, 0.25]]));
    golden("matrix.json", &r);
}

#[test]
fn ito_report() {
    let r = json(&run(&["ito", "--path", &fixture("remark.csv"), "--f", "poly:0.5,-1,2", "--t", "0.9", "--levels", "3..6"]));
    assert_eq!(r["settled"], true);
    golden("ito.json", &r);
}

#[test]
fn mc_report_is_seeded() {
    let args = [
        "mc", "run", "--model", "poisson:lambda=2,jump=1", "--paths", "40", "--seed", "7",
        "--levels", "6..10", "--eps", "0.1", "--metric", "j1",
    ];
    let one = run_env(&args, &[("CADLAG_QV_THREADS", "1")]);
    let two = run_env(&args, &[("CADLAG_QV_THREADS", "2")]);
    assert_eq!(stdout(&one), stdout(&two));
    let r = json(&one);
    assert_eq!(r["model"]["resolution"], 12);
    golden("mc_poisson.json", &r);
}
