//! End-to-end runs of the `dyadlab` binary.

use std::path::Path;
use std::process::{Command, Output};

fn dyadlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyadlab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL_RUN: &str = r#"{
  "domain": {"domain": "ball", "n": 1},
  "grid": {"levels": 3, "adjacent": 2, "sample_count": 20000},
  "cloud": {"points": 600, "delta_min": 0.01, "per_scale": 200, "ball_points": 256, "centers_per_decade": 4},
  "symbols": [{"symbol": "log_delta"}, {"symbol": "constant", "value": 2.0}],
  "experiments": [{"kind": "grid_audit"}, {"kind": "bmo", "r": 1.0, "p": 2.0}, {"kind": "commutator", "p": 2.0}],
  "seed": 9
}"#;

#[test]
fn empty_config_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.json"), "{}").unwrap();
    let out = dyadlab(tmp.path(), &["run", "--config", "empty.json", "--out-dir", "res"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<_> = std::fs::read_dir(tmp.path().join("res")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("manifest.json")]);
    let m = manifest(&tmp.path().join("res/manifest.json"));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["seed"], 0);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.json"), r#"{"grid": {"levles": 3}}"#).unwrap();
    let out = dyadlab(tmp.path(), &["run", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levles"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn repeated_runs_are_byte_identical_and_hashed() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("small.json"), SMALL_RUN).unwrap();
    for dir in ["a", "b"] {
        let out = dyadlab(tmp.path(), &["run", "--config", "small.json", "--out-dir", dir]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let m = manifest(&tmp.path().join("a/manifest.json"));
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 4);
    for o in outputs {
        let file = o["file"].as_str().unwrap();
        let a = std::fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
        assert_eq!(o["sha256"].as_str().unwrap(), dyadlab_cli::run::content_hash(&a));
    }
    assert_eq!(std::fs::read(tmp.path().join("a/manifest.json")).unwrap(), std::fs::read(tmp.path().join("b/manifest.json")).unwrap());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, threads) in [("one", "1"), ("three", "3")] {
        let out = dyadlab(tmp.path(), &["--threads", threads, "--seed", "4", "--out-dir", dir, "bmo", "--n", "1", "--symbol", "logdelta", "--functional", "kobayashi"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(tmp.path().join("one/osc.csv")).unwrap();
    assert_eq!(a, std::fs::read(tmp.path().join("three/osc.csv")).unwrap());
}

#[test]
fn grid_file_feeds_the_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let out = dyadlab(p, &["--out-dir", ".", "build-grid", "--n", "1", "--levels", "3", "--samples", "20000", "--adjacent", "2", "--out", "g.bin"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(&p.join("g.manifest.json"))["status"], "ok");
    let out = dyadlab(p, &["--out-dir", ".", "grid-audit", "--in", "g.bin", "--out", "audit.csv"]);
    assert_ne!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let audit = std::fs::read_to_string(p.join("audit.csv")).unwrap();
    // Header plus four levels for each of the two grids.
    assert_eq!(audit.lines().count(), 1 + 2 * 4);
    let m = manifest(&p.join("audit.manifest.json"));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap(), dyadlab_cli::run::content_hash(&std::fs::read(p.join("g.bin")).unwrap()));
    let hard_failures = m["checks"].as_array().unwrap().iter().filter(|c| c["hard"] == true && c["passed"] == false).count();
    assert_eq!(hard_failures, 0);
}

#[test]
fn cf_reproduction_on_the_two_ball() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dyadlab(tmp.path(), &["--out-dir", ".", "cf-verify", "--n", "2", "--eps", "0.05"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("cf.csv")).unwrap();
    assert!(text.starts_with("target,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn bad_flags_exit_with_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dyadlab(tmp.path(), &["berezin", "--symbol", "no_such_symbol"]);
    assert_eq!(out.status.code(), Some(1));
    let out = dyadlab(tmp.path(), &["run"]);
    assert_eq!(out.status.code(), Some(1));
}
