use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bvmlab::experiments::read_results;

fn bvmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvmlab")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/smoke.csv");
    let o = bvmlab(&["run", s(&config("smoke.toml")), "--output", s(&out), "--replicates", "3", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res = read_results(&out).unwrap();
    assert_eq!(res.rows.len(), 6);
    assert!(res.rows.iter().all(|r| r.experiment == "bvm" && r.tv.is_finite()));
    assert!(dir.path().join("nested/smoke.summary.csv").exists());
}

#[test]
fn seed_override_changes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        let o = bvmlab(&["run", s(&config("smoke.toml")), "--output", s(path), "--seed", seed]);
        assert!(o.status.success());
    }
    let (ra, rb) = (read_results(&a).unwrap(), read_results(&b).unwrap());
    assert_eq!(ra.rows.len(), rb.rows.len());
    assert_ne!(ra.rows[0].seed, rb.rows[0].seed);
}

#[test]
fn summarize_reproduces_the_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    assert!(bvmlab(&["run", s(&config("contraction_sequence.toml")), "--output", s(&out), "--replicates", "5"])
        .status
        .success());
    let first = std::fs::read(dir.path().join("c.summary.csv")).unwrap();
    let again = dir.path().join("again.csv");
    let o = bvmlab(&["summarize", s(&out), "--output", s(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&again).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.lines().next().unwrap().contains("outside@3_mean"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn check_conditions_prints_one_line_per_grid_point() {
    let o = bvmlab(&["check-conditions", s(&config("functional_sequence_quadratic.toml"))]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().trim_start().starts_with("1024"));
}

#[test]
fn invalid_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"bvm\"\nmodel = \"gaussian-sequence\"\nn-grid = [64, 32]\n").unwrap();
    let o = bvmlab(&["run", s(&bad)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));

    let garbled = dir.path().join("garbled.csv");
    std::fs::write(&garbled, "not,a,result,file\n").unwrap();
    let o = bvmlab(&["summarize", s(&garbled)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}
