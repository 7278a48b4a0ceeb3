//! End-to-end behavior of the `tbandit` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use sha2::{Digest, Sha256};

fn tbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbandit")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn malformed_json_is_a_usage_error_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"id\": \"x\",,\n}\n").unwrap();
    let out = tbandit(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("broken.json:2:"), "{err}");
}

#[test]
fn invalid_values_and_unknown_commands_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero_arms.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("smoke.json")).unwrap()).unwrap();
    cfg["arms"] = 0.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = tbandit(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));

    cfg["arms"] = 10.into();
    cfg["surprise"] = true.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    assert_eq!(tbandit(&["validate", path.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(tbandit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(tbandit(&["run"]).status.code(), Some(2));
}

#[test]
fn missing_config_is_a_runtime_error() {
    let out = tbandit(&["validate", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("/nonexistent/cfg.json"));
}

#[test]
fn validate_reports_derived_quantities() {
    let out = tbandit(&["validate", &config("fig2.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("T1=") && l.contains("lambda=")).count(), 3, "{stdout}");

    let out = tbandit(&["validate", &config("fig5_rho07_d100.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("comparison config ok"));

    for name in ["fig1.json", "fig3.json", "fig4.json", "fig5_rho03_d100.json", "fig5_rho07_d200.json", "smoke.json"] {
        assert_eq!(tbandit(&["validate", &config(name)]).status.code(), Some(0), "{name}");
    }
}

#[test]
fn smoke_run_is_fast_and_byte_stable() {
    let mut hashes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let started = Instant::now();
        let out = tbandit(&["run", &config("smoke.json"), "--root", dir.path().to_str().unwrap()]);
        let secs = started.elapsed().as_secs_f64();
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        assert!(secs < 5.0, "smoke run took {secs:.1} s");

        let results = dir.path().join("results/smoke");
        let summary = results.join("smoke_summary.csv");
        let body = std::fs::read_to_string(&summary).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("round,mean_cum_regret,std_cum_regret,mean_ratio"));
        assert_eq!(lines.count(), 100);
        assert!(results.join("smoke_reps.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(results.join("smoke_manifest.json")).unwrap()).unwrap();
        assert!(manifest["wall_clock_secs"].is_number());
        hashes.push((digest(&summary), digest(&results.join("smoke_reps.csv"))));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn variant_selection_writes_one_setting() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("fig1.json")).unwrap()).unwrap();
    cfg["horizon"] = 300.into();
    cfg["replications"] = 2.into();
    cfg["width_samples"] = 50.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    let root = dir.path().to_str().unwrap();

    let out = tbandit(&["run", path.to_str().unwrap(), "--variant", "d6", "--root", root]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let files: Vec<String> = std::fs::read_dir(dir.path().join("results/fig1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(files.len(), 3, "{files:?}");
    assert!(files.iter().all(|f| f.starts_with("fig1_d6_")));

    let out = tbandit(&["run", path.to_str().unwrap(), "--variant", "d7", "--root", root]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn comparison_writes_both_algorithms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cmp.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("fig5_rho07_d100.json")).unwrap()).unwrap();
    cfg["id"] = "cmp".into();
    cfg["arms"] = 10.into();
    cfg["dim"] = 20.into();
    cfg["horizon"] = 200.into();
    cfg["replications"] = 2.into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = tbandit(&["compare-lasso", path.to_str().unwrap(), "--root", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(dir.path().join("results/fig5/cmp_summary.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("algorithm,round,mean_cum_regret,std_cum_regret,mean_ratio"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 400);
    assert!(rows[0].starts_with("geltc,1,") && rows[200].starts_with("drlasso,1,"));
    let reps = std::fs::read_to_string(dir.path().join("results/fig5/cmp_reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 5);
}

#[test]
fn selftest_passes() {
    let out = tbandit(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}
