use std::path::Path;
use std::process::{Command, Output};

fn qfeat(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfeat"))
        .args(args)
        .env("QFEAT_OUT", out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn gen_data_respects_overrides_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["gen-data", "--scenario", "sphere-3sigma", "--seed", "7", "--n-train", "400", "--n-val", "100", "--n-test", "200"];
    let o = qfeat(tmp.path(), &args);
    assert!(o.status.success(), "{o:?}");
    let dir = tmp.path().join("data/sphere-3sigma");
    assert_eq!(lines(&dir.join("train.csv")), 401);
    assert_eq!(lines(&dir.join("val.csv")), 101);
    assert_eq!(lines(&dir.join("test.csv")), 201);
    assert!(stdout(&o).contains("{0:200, 1:200}"));
    let first = std::fs::read(dir.join("train.csv")).unwrap();
    assert!(qfeat(tmp.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.join("train.csv")).unwrap());
}

#[test]
fn full_scenario_has_default_split_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["gen-data", "--scenario", "sphere-3sigma", "--seed", "7"]);
    assert!(o.status.success());
    let dir = tmp.path().join("data/sphere-3sigma");
    assert_eq!(lines(&dir.join("train.csv")), 30_001);
    assert_eq!(lines(&dir.join("val.csv")), 15_001);
    assert_eq!(lines(&dir.join("test.csv")), 100_001);
}

#[test]
fn train_writes_layout_and_honours_max_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(
        tmp.path(),
        &[
            "train", "--experiment", "tiny", "--n-train", "64", "--n-val", "32", "--n-test", "32", "--runs", "2", "--max-epochs", "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let root = tmp.path().join("tiny");
    for run in ["run-0", "run-1"] {
        let metrics: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join(run).join("metrics.json")).unwrap()).unwrap();
        assert_eq!(metrics["training"]["history"].as_array().unwrap().len(), 1);
        assert!(root.join(run).join("checkpoint.json").exists());
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert!(summary["mean_auc"].as_f64().is_some());

    let ev = qfeat(
        tmp.path(),
        &["gen-data", "--n-train", "20", "--n-val", "20", "--n-test", "20", "--dir", tmp.path().join("d").to_str().unwrap()],
    );
    assert!(ev.status.success());
    let ev = qfeat(
        tmp.path(),
        &[
            "evaluate",
            "--checkpoint",
            root.join("run-0/checkpoint.json").to_str().unwrap(),
            "--data",
            tmp.path().join("d/test.csv").to_str().unwrap(),
        ],
    );
    assert!(ev.status.success(), "{}", String::from_utf8_lossy(&ev.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&ev)).unwrap();
    assert!(report["roc_auc"].as_f64().is_some());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "from-file", "qubits": 2, "train": {"max_epochs": 3, "n_runs": 1},
            "data": {"kind": "scenario", "name": "sphere-1sigma", "seed": 1, "n_train": 32, "n_val": 16, "n_test": 16}}"#,
    )
    .unwrap();
    let o = qfeat(tmp.path(), &["train", "--config", cfg.to_str().unwrap(), "--max-epochs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let resolved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("from-file/config.json")).unwrap()).unwrap();
    assert_eq!(resolved["train"]["max_epochs"], 1);
    assert_eq!(resolved["train"]["n_runs"], 1);
    assert_eq!(resolved["train"]["lr"], 0.001);
    assert_eq!(resolved["data"]["name"], "sphere-1sigma");
}

#[test]
fn pdr_with_mismatched_inputs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["train", "--model", "pdr", "--qubits", "4", "--d-inp", "6"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PDR"));
    assert!(!tmp.path().join("experiment").exists());
}

#[test]
fn malformed_csv_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bad");
    std::fs::create_dir_all(&dir).unwrap();
    for name in ["train", "val", "test"] {
        std::fs::write(dir.join(format!("{name}.csv")), "f0,label\n0.1,0\nx,1\n").unwrap();
    }
    let o = qfeat(tmp.path(), &["train", "--data-dir", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn counts_reports_gate_and_weight_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["counts", "--qubits", "2", "--d-inp", "6"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("18/69"));
    let o = qfeat(tmp.path(), &["counts", "--qubits", "5", "--d-inp", "15", "--json"]);
    let table: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(table["gate_ratio"], 0.24);
    assert_eq!(table["weight_ratio"], 2.0);
}

#[test]
fn fidelity_scan_zero_slice_has_zero_derivative() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["fidelity-scan", "--grid", "21"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(tmp.path().join("fidelity-scan/x2_0.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[5].abs() <= 1e-12);
        assert!((cells[2] - cells[3]).abs() <= 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 21 * 21);
    assert!(tmp.path().join("fidelity-scan/x2_pi4.csv").exists());
}

#[test]
fn diagnose_reports_table_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["diagnose", "--model", "pdr", "--qubits", "6", "--samples", "100"]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report[0]["block"], "encoder");
    assert_eq!(report[0]["classification"], "FixedDeformation");
    assert_eq!(report[0]["selective_directions"], 6);
    assert_eq!(report[0]["cap_exceeded"], false);
    assert_eq!(report[1]["classification"], "LearnableRigidRotation");

    let o = qfeat(tmp.path(), &["diagnose", "--model", "acls", "--qubits", "2", "--samples", "100"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report[0]["classification"], "LearnableDeformation");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let o = qfeat(tmp.path(), &["diagnose", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_on_clean_build() {
    let tmp = tempfile::tempdir().unwrap();
    let o = qfeat(tmp.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn unknown_flag_exits_with_validation_status() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(qfeat(tmp.path(), &["counts", "--bogus"]).status.code(), Some(1));
}
