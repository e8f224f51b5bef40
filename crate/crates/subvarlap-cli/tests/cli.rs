//! End-to-end tests of the `subvarlap` binary: exit codes, artifact layout,
//! and the byte-level determinism contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subvarlap"))
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn solve_smoke_produces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "solve.conf",
        "group = h1\n\
         resolution = 8,8,8\n\
         p = 2.1\n\
         f = sin(pi*x)*sin(pi*y)*sin(pi*t)\n\
         max-iterations = 2000\n\
         grad-tol = 0.00001\n",
    );
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &["solve"]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    for artifact in ["solution.csv", "energy_trace.csv", "diagnostics.json", "manifest.json"] {
        assert!(out.join(artifact).is_file(), "missing {artifact}");
    }
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("config_sha256"));
    assert!(manifest.contains("solution.csv"));
    let solution = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(solution.starts_with("x,y,t,value\n"));
}

#[test]
fn supercritical_exponent_fails_named_gate_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "gate.conf",
        "resolution = 16,16\n\
         p = 2.5\n\
         mode = zero-boundary\n\
         count = 4\n",
    );
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &["poincare"]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("p⁺ < Q"), "gate not named: {stderr}");
}

#[test]
fn unparseable_config_exits_1_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.conf",
        "resolution = 16,16\nf = x*y\np = 1.5 + (\n",
    );
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &["norm"]);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("line"), "no position in: {stderr}");
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "poin.conf",
        "resolution = 16,16\n\
         p = 1.5\n\
         mode = zero-boundary\n\
         family = random-trig\n\
         count = 6\n\
         seed = 42\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &["poincare"]).status.success());
    assert!(run(&cfg, &b, &["poincare"]).status.success());
    let csv_a = fs::read(a.join("poincare_level0.csv")).unwrap();
    let csv_b = fs::read(b.join("poincare_level0.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "fixed-seed CSVs differ");
    assert!(!csv_a.is_empty());
}

#[test]
fn thread_cap_env_var_is_respected_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "frac.conf",
        "resolution = 24,24\n\
         f = abs(sin(3*x)*cos(2*y))\n\
         alpha = 1\n",
    );
    let mut outputs = Vec::new();
    for (dir, threads) in [("t1", "1"), ("t2", "2")] {
        let out = tmp.path().join(dir);
        let res = bin()
            .args(["fracint", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("SUBVARLAP_THREADS", threads)
            .output()
            .unwrap();
        assert!(res.status.success());
        outputs.push(fs::read(out.join("fracint.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "thread count changed the output");
}

#[test]
fn refine_flag_doubles_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "norm.conf",
        "resolution = 8,8\np = 2\nf = x*y\n",
    );
    let out = tmp.path().join("out");
    let res = run(&cfg, &out, &["geometry", "--refine", "1"]);
    assert!(res.status.success());
    let geo = fs::read_to_string(out.join("geometry.json")).unwrap();
    assert!(geo.contains("16"), "refined resolution missing: {geo}");
}
