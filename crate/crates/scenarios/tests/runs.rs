use std::collections::BTreeMap;
use std::process::Command;

use continuum_scenarios::{bundled, run_scenario, RunOptions, RunSummary};

#[test]
fn toy_model_reproduces_square_root_law() {
    let config = bundled::load("toy_model").unwrap();
    let summary = run_scenario(&config, &RunOptions::in_memory()).unwrap();
    let p = summary.value("toy_probability_0.25").unwrap();
    assert!((p - 0.5).abs() <= 1e-6, "{p}");
    assert!(summary.passed(), "{}", summary.render());
}

#[test]
fn free_gaussian_equivariance_and_reproducibility() {
    let config = bundled::load("free_gaussian").unwrap();
    let a = run_scenario(&config, &RunOptions::in_memory()).unwrap();
    let b = run_scenario(&config, &RunOptions::in_memory()).unwrap();
    assert!(a.value("equivariance_l1").unwrap() <= 0.02);
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.value.to_bits(), y.value.to_bits(), "{} differs between runs", x.name);
    }
}

#[test]
fn tolerance_override_can_fail_a_metric() {
    let config = bundled::load("toy_model").unwrap();
    let options = RunOptions {
        tolerances: BTreeMap::from([("toy_density_error".to_string(), 1e-12)]),
        ..RunOptions::in_memory()
    };
    let summary = run_scenario(&config, &options).unwrap();
    let m = summary.metric("toy_density_error").unwrap();
    assert_eq!(m.threshold, Some(1e-12));
    assert!(!m.pass);
    assert!(!summary.passed());
}

#[test]
fn cli_writes_artifacts_and_reports_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    let bin = env!("CARGO_BIN_EXE_continuum");
    let status = Command::new(bin).args(["run", "-s", "toy_model", "-o"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    for file in ["summary.json", "frames.ndjson", "trajectories.ndjson"] {
        assert!(out.join(file).exists(), "missing {file}");
    }
    let summary = RunSummary::read_json(&out.join("summary.json")).unwrap();
    assert_eq!(summary.scenario, "toy_model");
    assert_eq!(summary.schema_version, 1);

    let report = Command::new(bin).arg("report").arg(&out).output().unwrap();
    assert_eq!(report.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&report.stdout).contains("toy_probability_0.25"));

    let failing = Command::new(bin)
        .args(["run", "-s", "toy_model", "--tol", "toy_density_error=1e-12", "-o"])
        .arg(dir.path().join("strict"))
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(1));
}

#[test]
fn cli_rejects_bad_input_with_exit_two() {
    let bin = env!("CARGO_BIN_EXE_continuum");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[grid]\nextents = [[0.0, 1.0]]\nnpoints = [100]\n").unwrap();
    let out = Command::new(bin).args(["validate", "-c"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let listed = Command::new(bin).arg("list").output().unwrap();
    assert_eq!(listed.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&listed.stdout).contains("vortex"));
}
