use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpnls")).args(args).env("DPNLS_THREADS", "2").output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn groundstate_default_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gs");
    let res = dpnls(&["groundstate", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let report = read_json(&out.join("report.json"));
    assert_eq!(report["format_version"], 1);
    let s = report["amplitude"].as_f64().unwrap();
    assert!((s - 1.5f64.sqrt()).abs() < 1e-9, "amplitude {s}");

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "groundstate");
    for f in manifest["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).is_file(), "missing {f}");
    }
    assert!(!out.join(".dpnls.lock").exists());
}

#[test]
fn invalid_exponents_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[model]\ndim = 1\np = 3.0\nq = 2.0\nomega = 0.0\n");
    let out = tmp.path().join("bad");
    let res = dpnls(&["groundstate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["exit_code"], 3);
    assert!(err["message"].as_str().unwrap().contains("q must exceed p"), "{err}");
}

#[test]
fn empty_stability_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[stability]\npq_grid = []\n");
    let out = tmp.path().join("map");
    let res = dpnls(&["stability-map", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    assert!(out.join("error.json").is_file());
}

#[test]
fn unknown_preset_and_conflicting_sources() {
    let res = dpnls(&["defaults", "--preset", "nope"]);
    assert_eq!(res.status.code(), Some(3));
    let res = dpnls(&["groundstate", "--preset", "stationary", "--config", "x.toml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn defaults_output_parses_back() {
    for preset in dpnls::cli::PRESETS {
        let res = dpnls(&["defaults", "--preset", preset]);
        assert_eq!(res.status.code(), Some(0));
        let cfg = dpnls::cli::RunConfig::from_toml(&String::from_utf8(res.stdout).unwrap()).unwrap();
        assert_eq!(cfg, dpnls::cli::RunConfig::preset(preset).unwrap());
    }
}

#[test]
fn stability_map_writes_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[stability]\npq_grid = [[2.0, 3.0], [2.0, 4.5]]\nboundary_samples = 20\n");
    let out = tmp.path().join("map");
    let res = dpnls(&["stability-map", "--config", &cfg, "--out", out.to_str().unwrap(), "--plot-data"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(rdr.records().count(), 2);
    let mut rdr = csv::Reader::from_path(out.join("boundary.csv")).unwrap();
    assert_eq!(rdr.records().count(), 20);
}
