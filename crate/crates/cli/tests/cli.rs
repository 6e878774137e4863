use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn invscore(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invscore"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = invscore(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Small fixture plus a 20-tree model in `dir`.
fn trained(dir: &Path) {
    fs::write(
        dir.join("run.toml"),
        "seed = 5\n[fixture]\nn_records = 500\nper_kind = 3\nplanted_rows = 300\n[forest]\nn_estimators = 20\n",
    )
    .unwrap();
    ok(dir, &["--config", "run.toml", "fixture", "--out", "fx"]);
    ok(dir, &["--config", "run.toml", "train", "--input", "fx/crashes.csv", "--out", "train"]);
}

#[test]
fn stochastic_command_without_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = invscore(dir.path(), &["fixture", "--out", "fx"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("fx").exists());
}

#[test]
fn missing_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = invscore(dir.path(), &["--seed", "1", "train", "--input", "nope.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "seed = 1\ntrees = 4\n").unwrap();
    let out = invscore(dir.path(), &["--config", "bad.toml", "grid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_records_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "CASENUM,HOUR\n1,not-a-number\n").unwrap();
    let out = invscore(dir.path(), &["ingest", "--input", "bad.csv", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("o").join("ingest.json").exists());
}

#[test]
fn train_evaluate_grid_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let train = json(&d.join("train/train.json"));
    assert_eq!(train["n_train"].as_u64().unwrap() + train["n_test"].as_u64().unwrap(), 1000);
    assert!(train["test_auc"].as_f64().unwrap() > 0.5);

    ok(d, &["--seed", "5", "evaluate", "--input", "fx/crashes.csv", "--model", "train/model.json", "--out", "ev"]);
    let ev = json(&d.join("ev/evaluate.json"));
    assert_eq!(ev["auc"], train["test_auc"]);

    ok(d, &["grid", "--model", "train/model.json", "--out", "grid"]);
    let grid = fs::read_to_string(d.join("grid/grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 865);
    let manifest = json(&d.join("grid/grid.manifest.json"));
    assert_eq!(manifest["command"], "grid");
    assert_eq!(manifest["inputs"][0]["path"], "train/model.json");
}

#[test]
fn model_from_another_schema_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    let mut model = json(&d.join("train/model.json"));
    model["schema_id"] = Value::from("other");
    fs::write(d.join("other.json"), serde_json::to_vec(&model).unwrap()).unwrap();
    let out = invscore(d, &["grid", "--model", "other.json", "--out", "g"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn same_run_in_two_directories_hashes_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);
    ok(d, &["sensitivity", "--model", "train/model.json", "--out", "a"]);
    ok(d, &["sensitivity", "--model", "train/model.json", "--out", "b"]);
    let (a, b) = (json(&d.join("a/sensitivity.manifest.json")), json(&d.join("b/sensitivity.manifest.json")));
    assert_eq!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(
        fs::read(d.join("a/sensitivity.csv")).unwrap(),
        fs::read(d.join("b/sensitivity.csv")).unwrap()
    );
}
