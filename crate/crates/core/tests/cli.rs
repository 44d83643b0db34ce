//! The binary end to end: exit codes, artifacts, threads and the zero cache.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_with(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.txt");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_diracbag"))
        .arg("--config")
        .arg(&path)
        .args(extra)
        .env_remove("DIRACBAG_CACHE")
        .output()
        .unwrap()
}

const CURVES: &str = "mode = curves\nR = 3\nm = 1\nj_max = 5/2\nk_max = 1\ntau_min = -2\ntau_max = 2\ntau_step = 0.25\n";

#[test]
fn curves_run_writes_csv_and_exits_zero() {
    let dir = workdir("curves");
    let out = run_with(&dir, CURVES, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tau,lambda,j2,branch,k,residual,multiplicity"));
    // 3 values of j, 2 branches, k in -1..=1, 17 values of tau.
    assert_eq!(lines.count(), 3 * 2 * 3 * 17);
}

#[test]
fn empty_tau_range_is_header_only() {
    let dir = workdir("empty");
    let target = dir.join("out.csv");
    let out = run_with(&dir, "mode = curves\ntau_min = 1\ntau_max = -1\n", &["--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(target).unwrap(), "tau,lambda,j2,branch,k,residual,multiplicity\n");
}

#[test]
fn output_is_independent_of_threads_and_cache() {
    let dir = workdir("threads");
    let cache = dir.join("cache");
    let plain = run_with(&dir, CURVES, &["--threads", "1"]).stdout;
    let threaded = run_with(&dir, CURVES, &["--threads", "4"]).stdout;
    assert_eq!(plain, threaded);
    let miss = run_with(&dir, CURVES, &["--cache-dir", cache.to_str().unwrap()]);
    assert!(cache.join("bessel_zeros.txt").exists());
    let hit = run_with(&dir, CURVES, &["--cache-dir", cache.to_str().unwrap()]);
    assert_eq!(miss.stdout, plain);
    assert_eq!(hit.stdout, plain);
}

#[test]
fn usage_errors_exit_one() {
    let dir = workdir("usage");
    let out = Command::new(env!("CARGO_BIN_EXE_diracbag")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = run_with(&dir, "mode = curves\nR = -x\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = run_with(&dir, "mode = bie\nR = 1\n", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_two() {
    let dir = workdir("solver");
    let out = run_with(&dir, "mode = bie\nkind = sphere\nR = 1\nn_theta = 8\nlambda_max = 1.0001\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn failed_verification_exits_three() {
    // An elongated ellipsoid at 8x16 is under-resolved for the boundary solver.
    let dir = workdir("verify");
    let out = run_with(&dir, "mode = verify\nkind = ellipsoid\na = 2\nb = 1\nc = 1\nladder = 8x16\n", &[]);
    assert_eq!(out.status.code(), Some(3));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.lines().any(|l| l.starts_with("PASS ball.")));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(!stderr.is_empty() && stderr.lines().all(|l| l.starts_with("FAIL")));
}
