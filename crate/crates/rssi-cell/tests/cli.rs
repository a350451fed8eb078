use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rssi_cell::manifest::{file_sha256, RunManifest};
use rssi_cell::report::{self, PREDICTIONS_HEADER};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rssi-cell"));
    cmd.env_remove(rssi_cell::DATA_DIR_ENV);
    cmd
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn rssi-cell")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Short trajectory so full mask sweeps stay quick.
const FAST_SCENARIO: &str = r#"{
  "trajectory": {
    "start_x": 6.0,
    "speed": 4.0,
    "segments": [{"dwell": 10}, {"drive_to": -11.5}, {"dwell": 15}, {"drive_to": 6.0}, {"dwell": 10}]
  }
}"#;

fn generate(dir: &Path, count: usize) -> PathBuf {
    fs::write(dir.join("fast.json"), FAST_SCENARIO).unwrap();
    let o = run(&["generate", "--scenario", "fast.json", "--out", "data", "--count", &count.to_string(), "--seed", "9"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("data")
}

#[test]
fn generate_writes_sets_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--out", "a", "--count", "6", "--seed", "3"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 6 sets"));
    let files: Vec<_> = fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.iter().filter(|f| f.to_string_lossy().ends_with(".csv")).count(), 6);

    let o = run(&["generate", "--out", "b", "--count", "6", "--seed", "3"], tmp.path());
    assert!(o.status.success());
    for i in 0..6 {
        let name = format!("set-{i:02}.csv");
        assert_eq!(
            file_sha256(&tmp.path().join("a").join(&name)).unwrap(),
            file_sha256(&tmp.path().join("b").join(&name)).unwrap()
        );
    }
    let ma = RunManifest::load(&tmp.path().join("a/manifest.json")).unwrap();
    let mb = RunManifest::load(&tmp.path().join("b/manifest.json")).unwrap();
    assert_eq!(ma.outputs, mb.outputs);
    assert_eq!(ma.outputs.len(), 6);

    let o = run(&["generate", "--out", "c", "--count", "6", "--seed", "4"], tmp.path());
    assert!(o.status.success());
    let mc = RunManifest::load(&tmp.path().join("c/manifest.json")).unwrap();
    assert_ne!(ma.outputs, mc.outputs);
}

#[test]
fn invalid_scenario_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"channel": {"wall_attenuation_db": "thick"}}"#).unwrap();
    let o = run(&["generate", "--scenario", "bad.json", "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema error"), "{}", stderr(&o));

    fs::write(tmp.path().join("bad.json"), "{not json").unwrap();
    assert_eq!(run(&["generate", "--scenario", "bad.json", "--out", "x"], tmp.path()).status.code(), Some(2));
}

#[test]
fn evaluate_summary_matches_report() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 3);
    let o = run(&["evaluate", "--data-dir", "data", "--out", "ev", "--moment-l", "1", "--filter", "none"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("ev/report.json")).unwrap()).unwrap();
    let mean = report["summary"]["mean_accuracy"].as_f64().unwrap();
    assert!(stdout(&o).contains(&format!("mean accuracy {mean} over 3 split(s)")), "{}", stdout(&o));
    let reports = report["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 3);
    let manual = reports.iter().map(|r| r["report"]["accuracy"].as_f64().unwrap()).sum::<f64>() / 3.0;
    assert_eq!(manual, mean);
    assert!(!tmp.path().join("ev/hmm").exists());
}

#[test]
fn evaluate_resolves_nodes_and_writes_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 3);
    fs::write(tmp.path().join("cfg.json"), r#"{"nodes": ["I-E", "I-DR", "O-M", "O-DR"], "moment_l": 2, "filter": "hmm"}"#)
        .unwrap();
    let o = run(&["evaluate", "--data-dir", "data", "--config", "cfg.json", "--out", "ev", "--splits", "1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("nodes=I-E,I-DR,O-M,O-DR"));
    let pred = tmp.path().join("ev/predictions.csv");
    report::check_header(&pred, PREDICTIONS_HEADER).unwrap();
    let rows = report::read_predictions(&pred).unwrap();
    assert!(rows.iter().all(|r| r.split == Some(1)));
    assert!(tmp.path().join("ev/hmm/split-001.json").exists());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("ev/report.json")).unwrap()).unwrap();
    assert_eq!(report["reports"][0]["report"]["config"]["node_mask"]["bits"], serde_json::json!(0b1_1001_0001));

    // Flags win over the config file.
    let o = run(&["evaluate", "--data-dir", "data", "--config", "cfg.json", "--out", "ev2", "--filter", "none"], tmp.path());
    assert!(stdout(&o).contains("filter=none"));

    let o = run(&["evaluate", "--data-dir", "data", "--out", "ev3", "--nodes", "I-E,Nope"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("valid names: I-E, I-T1"), "{}", stderr(&o));
}

#[test]
fn data_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(tmp.path(), 2);
    let o = bin().args(["validate"]).env(rssi_cell::DATA_DIR_ENV, &data).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("2 sets, nodes: I-E,"));
    let o = run(&["validate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    fs::write(data.join("a.csv"), "t,label,rssi_A,rssi_B\n0,0,-50,-60\n1,0,-101,-60\n").unwrap();
    let o = run(&["validate", "--data-dir", "data"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rssi out of range at row 3"), "{}", stderr(&o));

    fs::write(data.join("a.csv"), "t,label,rssi_A,rssi_B\n0,0,-50,-60\n").unwrap();
    fs::write(data.join("b.csv"), "t,label,rssi_A,rssi_C\n0,0,-50,-60\n").unwrap();
    assert_eq!(run(&["validate", "--data-dir", "data"], tmp.path()).status.code(), Some(3));

    assert_eq!(run(&["validate", "--data-dir", "missing"], tmp.path()).status.code(), Some(3));
}

#[test]
fn sweep_l_table_and_empty_list() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 3);
    let o = run(
        &[
            "sweep-l", "--data-dir", "data", "--out", "sl", "--l-values", "1,2,3", "--filters", "none,median(1),median(5),median(10),hmm",
            "--nodes", "I-E,I-DR,O-M,O-DR",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(tmp.path().join("sl/accuracy_vs_L.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "L,filter,mean_accuracy,n_cells");
    assert_eq!(lines.len(), 1 + 3 * 5);
    assert!(lines[1].starts_with("1,none,"));
    assert!(lines[2].starts_with("1,median(1),"));
    assert!(lines[15].starts_with("3,hmm,"));
    assert!(lines[1..].iter().all(|l| l.ends_with(",3")));
    report::check_header(&tmp.path().join("sl/sweep_cells.csv"), report::SWEEP_CELLS_HEADER).unwrap();

    let o = run(&["sweep-l", "--data-dir", "data", "--out", "sl2", "--l-values", ""], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty L list"));
    fs::write(tmp.path().join("s.json"), r#"{"l_values": []}"#).unwrap();
    let o = run(&["sweep-l", "--data-dir", "data", "--config", "s.json", "--out", "sl3"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_nodes_enumerates_every_mask() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 2);
    let o = run(&["sweep-nodes", "--data-dir", "data", "--out", "sn", "--moment-l", "1", "--bin-width", "0.05"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let path = tmp.path().join("sn/mask_histogram.csv");
    report::check_header(&path, report::MASK_HISTOGRAM_HEADER).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 1023);
    assert_eq!(text.lines().filter(|l| l.starts_with("1023,")).count(), 1);
    let bins = fs::read_to_string(tmp.path().join("sn/mask_histogram_bins.csv")).unwrap();
    assert_eq!(bins.lines().count(), 1 + 20);
    let total: usize = bins.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 1023);
}

#[test]
fn filter_reapplies_saved_models() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 3);
    let o = run(&["evaluate", "--data-dir", "data", "--out", "ev", "--splits", "0"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        &["filter", "--input", "ev/predictions.csv", "--hmm", "ev/hmm/split-000.json", "--out", "f"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    // Same model over the same y_hat column: z_hat must come back unchanged.
    assert_eq!(
        fs::read(tmp.path().join("ev/predictions.csv")).unwrap(),
        fs::read(tmp.path().join("f/predictions.csv")).unwrap()
    );

    let o = run(&["filter", "--input", "ev/predictions.csv", "--median", "0", "--out", "m"], tmp.path());
    assert!(o.status.success());
    let rows = report::read_predictions(&tmp.path().join("m/predictions.csv")).unwrap();
    assert!(rows.iter().all(|r| r.z_hat == r.y_hat));

    assert_eq!(run(&["filter", "--input", "ev/predictions.csv", "--out", "n"], tmp.path()).status.code(), Some(2));
    fs::write(tmp.path().join("bad.json"), r#"{"n": 1, "A": [2.0], "B": [1.0], "pi0": [1.0]}"#).unwrap();
    let o = run(&["filter", "--input", "ev/predictions.csv", "--hmm", "bad.json", "--out", "n"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replay_detects_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path(), 2);
    let o = run(&["evaluate", "--data-dir", "data", "--out", "ev", "--filter", "median(3)"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["replay", "ev/manifest.json", "--out", "again"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("byte-identically"));
    assert_eq!(fs::read(tmp.path().join("ev/report.json")).unwrap(), fs::read(tmp.path().join("again/report.json")).unwrap());

    let set = tmp.path().join("data/set-00.csv");
    let text = fs::read_to_string(&set).unwrap();
    fs::write(&set, text.replacen("\n0,0,", "\n0,1,", 1)).unwrap();
    let o = run(&["replay", "ev/manifest.json", "--out", "again2"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("inputs changed"));
}

#[test]
fn import_converts_wide_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("car1.csv"), "Time;I-E;O-M;Label\n0.0;-70.4;-88;0\n0.1;;-87.25;1\n").unwrap();
    let o = run(&["import", "car1.csv", "--out", "conv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(tmp.path().join("conv/car1.csv")).unwrap(),
        "t,label,rssi_I-E,rssi_O-M\n0,0,-70.4,-88\n1,1,-100,-87.3\n"
    );
}
