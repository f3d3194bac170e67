use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn deepauto(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepauto"))
        .args(args)
        .env("DEEPAUTO_LOG", "warn")
        .output()
        .expect("run binary")
}

fn ok(args: &[&str]) -> String {
    let out = deepauto(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: &str = r#"{"n_cells":3,"days":4,"missing_rate":0.0,"seed":5}"#;
const MODEL: &str = r#"{"step_seconds":900,"window":{"n_r":6,"n_p":1,"n_s":0,"period_steps":96,"season_steps":672},
  "hidden_r":4,"hidden_p":4,"hidden_s":4,"ext_embed_dim":4,"output":{"scalar_horizons":[1,8]},
  "max_epochs":3,"batch_size":128,"seed":3}"#;

#[test]
fn offline_workflow_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.ndjson");
    let model = dir.path().join("model.daut");
    let preds = dir.path().join("preds.ndjson");

    ok(&["generate", "--config", SYNTH, "--output", s(&data)]);
    let n_lines = std::fs::read_to_string(&data).unwrap().lines().count();
    assert!(n_lines >= 3 * 4 * 96 * 2);

    let manifest: Value = serde_json::from_str(&ok(&["prepare", "--input", s(&data), "--config", MODEL])).unwrap();
    assert_eq!(manifest["cells"].as_array().unwrap().len(), 3);
    assert!(manifest["n_train"].as_u64().unwrap() > 0);

    let report: Value = serde_json::from_str(&ok(&["train", "--input", s(&data), "--config", MODEL, "--output", s(&model)])).unwrap();
    assert_eq!(report["epochs"].as_array().unwrap().len(), 3);
    assert!(model.exists());

    let eval: Value = serde_json::from_str(&ok(&["evaluate", "--input", s(&data), "--model", s(&model)])).unwrap();
    let algs: Vec<&str> = eval["rows"].as_array().unwrap().iter().map(|r| r["algorithm"].as_str().unwrap()).collect();
    for a in ["naive", "seasonal-naive", "ridge-ar", "deepauto"] {
        assert!(algs.contains(&a), "{a} missing from {algs:?}");
    }

    ok(&["predict", "--model", s(&model), "--input", s(&data), "--output", s(&preds)]);
    let lines: Vec<Value> = std::fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // Anchors 96..=384 for each of three cells.
    assert_eq!(lines.len(), 3 * (4 * 96 - 96 + 1));
    assert!(lines[0]["h1"].is_f64() && lines[0]["h8"].is_f64());
    assert_eq!(lines[0]["model_version"], 0);

    let report_path = dir.path().join("test_report.json");
    ok(&["predict", "--model", s(&model), "--input", s(&data), "--split", "test", "--output", s(&preds), "--report", s(&report_path)]);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(rep["rows"].as_array().unwrap().len(), 2);

    let acf = ok(&["acf", "--input", s(&data), "--config", MODEL, "--max-lag", "100"]);
    let mut rows = acf.lines();
    assert!(rows.next().unwrap().starts_with("lag,lag_hours,mean,"));
    assert_eq!(rows.count(), 101);
}

#[test]
fn serve_replays_input_and_reports_health() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.ndjson");
    let model = dir.path().join("model.daut");
    ok(&["generate", "--config", SYNTH, "--output", s(&data)]);
    ok(&["train", "--input", s(&data), "--config", MODEL, "--output", s(&model)]);
    let out = ok(&[
        "serve", "--model", s(&model), "--listen-http", "127.0.0.1:0", "--input", s(&data), "--exit-after-input",
    ]);
    let mut lines = out.lines();
    let announce: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert!(announce["http"].as_str().unwrap().starts_with("127.0.0.1:"));
    let health: Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["cells"], 3);
    assert_eq!(health["predictions"], 3 * (4 * 96 - 96 + 1));
    assert_eq!(health["malformed"], 0);
}

#[test]
fn exit_codes_distinguish_usage_from_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(deepauto(&["--help"]).status.code(), Some(0));
    assert_eq!(deepauto(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(deepauto(&["generate", "--config", "{\"n_cells\":0}"]).status.code(), Some(1));
    assert_eq!(deepauto(&["generate", "--config", "{\"bogus\":1}"]).status.code(), Some(1));

    let missing = dir.path().join("missing.ndjson");
    let out = deepauto(&["prepare", "--input", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    let log_line = String::from_utf8(out.stderr).unwrap();
    let v: Value = serde_json::from_str(log_line.lines().last().unwrap()).unwrap();
    assert_eq!(v["level"], "error");

    let bad_model = dir.path().join("bad.daut");
    std::fs::write(&bad_model, b"DAUT garbage").unwrap();
    let data = dir.path().join("d.ndjson");
    std::fs::write(&data, "").unwrap();
    assert_eq!(deepauto(&["predict", "--model", s(&bad_model), "--input", s(&data)]).status.code(), Some(2));
}
