use std::path::Path;
use std::process::{Command, Output};

use prefmpc::table::Table;

fn prefmpc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prefmpc")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: &str = r#"{ "n_t": 12, "test_size": 40, "simulations": 5, "train": { "restarts": 2 } }"#;

#[test]
fn generate_train_evaluate_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.json"), SMALL).unwrap();
    ok(&prefmpc(&["generate-data", "--config", "small.json", "--seed", "3", "--nd", "10,30", "--out", "data"], d));
    for f in ["train_10.json", "train_30.json", "test.json", "config.json"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }
    ok(&prefmpc(
        &["train", "--data", "data/train_30.json", "--test", "data/test.json", "--out", "m30"],
        d,
    ));
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("m30/model.json")).unwrap()).unwrap();
    assert_eq!(model["theta"].as_array().unwrap().len(), 24);

    ok(&prefmpc(
        &["evaluate", "--config", "small.json", "--seed", "3", "--model", "m30/model.json", "--out", "eval"],
        d,
    ));
    let table = Table::from_tsv(&std::fs::read_to_string(d.join("eval/table.tsv")).unwrap()).unwrap();
    assert!(table.rows.len() >= 2);

    let sim = prefmpc(&["simulate", "--model", "oracle", "--x0", "0,0,0,0,0,0", "--steps", "5"], d);
    ok(&sim);
    let doc: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    assert_eq!(doc["metrics"]["phi"], 0.0);
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("small.json"), SMALL).unwrap();
    let out = prefmpc(&["generate-data", "--config", "small.json", "--nd", "100000", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = prefmpc(&["train", "--data", "missing.json", "--out", "m"], d);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(d.join("bad.json"), "{ \"n_t\": ").unwrap();
    let out = prefmpc(&["reproduce-quadratic", "--config", "bad.json", "--out", "r"], d);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(prefmpc(&["bogus"], d).status.code(), Some(2));
}
