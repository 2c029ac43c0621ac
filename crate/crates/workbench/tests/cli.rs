use std::path::Path;
use std::process::{Command, Output};

use nematic_workbench::config::parse_config;
use nematic_workbench::io::{read_records, snapshot_read_raw, RECORDS_HEADER};
use nematic_workbench::presets;

fn nematic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nematic")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let text = r#"{
        "grid": {"nx": 16, "ny": 16},
        "potential": {"kind": "gl", "eta": 0.25},
        "initial": {"preset": "cavity"},
        "dt": {"policy": "fixed", "value": 0.002},
        "t_max": 0.1,
        "record_interval": 1
    }"#;
    let path = dir.join("small.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = nematic(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = nematic(&["simulate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_documents_defaults() {
    let o = nematic(&["simulate", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("record_interval") && text.contains("default 10"), "{text}");
}

#[test]
fn fit_rate_on_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, format!("{RECORDS_HEADER}\n")).unwrap();
    let o = nematic(&["fit-rate", "--records", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("insufficient points"), "{}", stderr(&o));
}

#[test]
fn bad_config_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"grid": {"nx": 8, "ny": 8}, "params": {"nu": -1}, "potential": {"kind": "gl", "eta": 0.3}, "t_max": 1}"#).unwrap();
    let o = nematic(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.nu"), "{}", stderr(&o));
}

#[test]
fn simulate_is_deterministic_and_feeds_audit_and_steady() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = nematic(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ra = std::fs::read(a.join("records.csv")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("records.csv")).unwrap());
    assert_eq!(read_records(&a.join("records.csv")).unwrap().len(), 51);

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["termination"], "t_max");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    // the echoed config is itself a valid config
    let echoed = parse_config(&manifest["config"].to_string()).unwrap();
    assert_eq!(echoed.grid.nx, 16);

    let o = nematic(&["audit", "--records", a.join("records.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["energy_drop"].as_f64().unwrap() > 0.0);

    let snap = a.join("final.snap");
    let steady_out = dir.path().join("steady");
    let o = nematic(&[
        "steady",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        snap.to_str().unwrap(),
        "--out",
        steady_out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(steady_out.join("steady.json")).unwrap()).unwrap();
    assert!(rep["residual_norm"].as_f64().unwrap() <= 1e-10);
    assert!(steady_out.join("run.json").exists());
    let s = snapshot_read_raw(&steady_out.join("steady.snap")).unwrap();
    assert_eq!((s.nx, s.ny, s.m), (16, 16, 2));
}

#[test]
fn simulate_cavity_preset_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = nematic(&["simulate", "--preset", "cavity", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["records.csv", "final.snap", "run.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["termination"], "residual_target");
    let recs = read_records(&dir.path().join("records.csv")).unwrap();
    assert!(recs.last().unwrap().v_h1 + recs.last().unwrap().residual_l2 <= 1e-6);

    let o = nematic(&["fit-rate", "--records", dir.path().join("records.csv").to_str().unwrap(), "--target", "state"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn snapshot_seeded_config_requires_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"grid": {"nx": 8, "ny": 8}, "initial": {"snapshot": "x.snap"}, "potential": {"kind": "gl", "eta": 0.3}, "t_max": 1}"#).unwrap();
    let o = nematic(&["simulate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("boundary"));
}

#[test]
fn mms_linear_case_saturates() {
    let o = nematic(&["mms", "--case", "linear"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(t["saturated"], true);
    let o = nematic(&["mms", "--case", "cubic"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn preset_configs_normalize_idempotently() {
    for name in presets::NAMES {
        let c = presets::config(name).unwrap();
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(c, again, "{name}");
    }
}
