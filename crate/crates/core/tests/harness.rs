//! Scenario runner and command-line contract.

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

use fbms::harness::{
    builtin_scenario, emit_report_bundle, list_scenarios, run_scenario, RunOptions, Scenario, MANIFEST_NAME, SCHEMA, STAGES,
};

fn fbms() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fbms"));
    cmd.env_remove("FBMS_SEED");
    cmd
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).expect("json")).expect("write config");
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("read")).expect("json")
}

#[test]
fn builtins_round_trip_through_json() {
    let catalog = list_scenarios();
    assert!(catalog.iter().any(|e| e.kind == "batch"));
    for entry in catalog.iter().filter(|e| e.kind != "batch") {
        let s = builtin_scenario(entry.name).expect("builtin");
        let back = Scenario::from_json(&s.to_json()).expect("round trip");
        assert_eq!(s, back, "{}", entry.name);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut value: Value = serde_json::from_str(&builtin_scenario("strip-on-plane").expect("builtin").to_json()).expect("json");
    value["solve"]["grad_tolerance"] = json!(1e-3);
    let err = Scenario::from_json(&value.to_string()).expect_err("unknown key");
    assert!(err.to_string().contains("grad_tolerance"), "{err}");
}

#[test]
fn library_runs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let first = run_scenario("builtin:strip-on-plane", &RunOptions::new(a.path())).expect("run");
    let second = run_scenario("builtin:strip-on-plane", &RunOptions::new(b.path())).expect("run");
    assert!(first.passed);
    assert_eq!(first.outputs, second.outputs);
    assert_eq!(first.scenario_hash, second.scenario_hash);
    let bundle_a = fs::read(emit_report_bundle(&a.path().join(MANIFEST_NAME)).expect("bundle")).expect("read");
    let bundle_b = fs::read(emit_report_bundle(&b.path().join(MANIFEST_NAME)).expect("bundle")).expect("read");
    assert_eq!(bundle_a, bundle_b);
}

#[test]
fn every_stage_of_a_full_scenario_reports() {
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = run_scenario("builtin:strip-on-plane", &RunOptions::new(dir.path())).expect("run");
    let stages: Vec<&str> = manifest.scenarios[0].stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, STAGES);
    for entry in &manifest.outputs {
        assert!(dir.path().join(&entry.path).exists(), "{}", entry.path);
    }
    let density = fs::read_to_string(dir.path().join("density.csv")).expect("density.csv");
    assert!(density.starts_with("r,mass,theta,deficit_to_next\n"));
}

#[test]
fn exit_code_follows_stage_verdicts() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut wrong: Value = serde_json::from_str(&builtin_scenario("disk-in-ball").expect("builtin").to_json()).expect("json");
    wrong["stability"]["expect_stable"] = json!(true);
    let config = write_json(dir.path(), "wrong.json", &wrong);
    let out = dir.path().join("wrong-out");
    let status = fbms().args(["run", &config, "--out"]).arg(&out).output().expect("run").status;
    assert_eq!(status.code(), Some(1));
    let manifest = read_json(&out.join(MANIFEST_NAME));
    assert_eq!(manifest["passed"], json!(false));
    let failed: Vec<&Value> = manifest["scenarios"][0]["stages"]
        .as_array()
        .expect("stages")
        .iter()
        .filter(|s| s["passed"] == json!(false))
        .collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["stage"], json!("stability"));

    let out = dir.path().join("ok-out");
    let status = fbms().args(["run", "builtin:halfplane-monotone", "--out"]).arg(&out).output().expect("run").status;
    assert_eq!(status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut value: Value = serde_json::from_str(&builtin_scenario("strip-on-plane").expect("builtin").to_json()).expect("json");
    value["colour"] = json!("blue");
    let config = write_json(dir.path(), "bad.json", &value);
    let out = dir.path().join("out");
    let status = fbms().args(["run", &config, "--out"]).arg(&out).output().expect("run").status;
    assert_eq!(status.code(), Some(2));
    assert_eq!(read_json(&out.join("failure.json"))["stage"], json!("config"));

    let status = fbms()
        .args(["run", "builtin:strip-on-plane", "--out"])
        .arg(dir.path().join("seed"))
        .env("FBMS_SEED", "seven")
        .output()
        .expect("run")
        .status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn oversized_density_radius_names_the_stage() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut value: Value = serde_json::from_str(&builtin_scenario("disk-in-ball").expect("builtin").to_json()).expect("json");
    value["monotonicity"]["radii"] = json!([0.1, 0.6]);
    value.as_object_mut().expect("object").remove("fermi");
    let config = write_json(dir.path(), "wide.json", &value);
    let manifest = run_scenario(&config, &RunOptions::new(dir.path().join("out"))).expect("run");
    assert!(!manifest.passed);
    let failure = manifest.scenarios[0].failure.as_ref().expect("failure");
    assert_eq!(failure.stage, "monotonicity");
    assert!(failure.message.contains("R₀/2"), "{}", failure.message);
    let report = read_json(&dir.path().join("out").join("failure.json"));
    assert_eq!(report["stage"], json!("monotonicity"));
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().expect("tempdir");
    let status = fbms()
        .args(["run", "builtin:radial-segment-k1", "--out"])
        .arg(dir.path())
        .env("FBMS_SEED", "7")
        .output()
        .expect("run")
        .status;
    assert_eq!(status.code(), Some(0));
    let manifest = read_json(&dir.path().join(MANIFEST_NAME));
    assert_eq!(manifest["scenarios"][0]["seed"], json!(7));
}

#[test]
fn tampered_outputs_block_the_bundle() {
    let dir = tempfile::tempdir().expect("tempdir");
    run_scenario("builtin:halfplane-monotone", &RunOptions::new(dir.path())).expect("run");
    fs::write(dir.path().join("density.csv"), "r\n").expect("overwrite");
    let err = emit_report_bundle(&dir.path().join(MANIFEST_NAME)).expect_err("hash mismatch");
    assert!(err.to_string().contains("monotonicity"), "{err}");
}

#[test]
fn batch_files_mix_named_and_inline_scenarios() {
    let dir = tempfile::tempdir().expect("tempdir");
    let inline: Value = serde_json::from_str(&builtin_scenario("radial-segment-k1").expect("builtin").to_json()).expect("json");
    let batch = json!({
        "schema": SCHEMA,
        "name": "mixed",
        "scenarios": ["builtin:halfplane-monotone", inline],
    });
    let config = write_json(dir.path(), "batch.json", &batch);
    let mut options = RunOptions::new(dir.path().join("out"));
    options.jobs = 2;
    let manifest = run_scenario(&config, &options).expect("run");
    assert!(manifest.passed);
    let names: Vec<&str> = manifest.scenarios.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["halfplane-monotone", "radial-segment-k1"]);
    assert!(manifest.outputs.iter().any(|o| o.path.starts_with("halfplane-monotone/")));
}

#[test]
fn list_prints_the_catalog() {
    let out = fbms().arg("list").output().expect("list");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).expect("utf8");
    for entry in list_scenarios() {
        assert!(text.contains(entry.name), "{}", entry.name);
    }
}
