//! End-to-end CLI contract tests: exit codes, artifacts, manifests,
//! determinism, and partial-output cleanup.

use std::path::{Path, PathBuf};
use std::process::Output;
use std::sync::OnceLock;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_satflow")
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .output()
        .expect("spawn satflow")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn workspace() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = std::env::temp_dir().join(format!("satflow-cli-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    })
}

const TINY_SCENARIO: &str = r#"
name = "tiny"
seed = 7
flows_per_class = 2
flow_duration = 12.0

[channel]
propagation_delay = 0.0
jitter_bound = 0.0
capacity = 5e6
queue_limit = 2000000

[[profile]]
class = "progressive_streaming"
mean_bitrate = 1.2e6
chunk_size = 600000
chunk_period = 4.0
packet_size = 1350

[[profile]]
class = "video_conference"
mean_bitrate = 1.2e6
frame_rate = 30.0
packet_mean = 500
packet_jitter = 200
"#;

fn scenario_path() -> PathBuf {
    let path = workspace().join("tiny.toml");
    if !path.exists() {
        std::fs::write(&path, TINY_SCENARIO).unwrap();
    }
    path
}

/// Generated data shared by the downstream command tests.
fn data_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let out = workspace().join("data");
        let output = run(&[
            "gen",
            "--scenario",
            scenario_path().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_exit(&output, 0);
        out
    })
}

fn read_dir_sorted(dir: &Path) -> Vec<PathBuf> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    entries
}

#[test]
fn gen_writes_traces_labels_and_manifest() {
    let dir = data_dir();
    let traces = read_dir_sorted(&dir.join("traces"));
    assert_eq!(traces.len(), 4, "2 flows per class x 2 profiles");
    assert!(dir.join("labels.csv").exists());
    assert!(dir.join("manifest.json").exists());

    let labels = std::fs::read_to_string(dir.join("labels.csv")).unwrap();
    assert!(labels.contains("progressive_streaming"));
    assert!(labels.contains("video_conference"));
}

#[test]
fn gen_is_byte_deterministic() {
    let first = data_dir();
    let second = workspace().join("data-again");
    let output = run(&[
        "gen",
        "--scenario",
        scenario_path().to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    for path in read_dir_sorted(&first.join("traces")) {
        let name = path.file_name().unwrap();
        let a = std::fs::read(&path).unwrap();
        let b = std::fs::read(second.join("traces").join(name)).unwrap();
        assert_eq!(a, b, "trace {name:?} differs between runs");
    }
    assert_eq!(
        std::fs::read(first.join("labels.csv")).unwrap(),
        std::fs::read(second.join("labels.csv")).unwrap()
    );
}

#[test]
fn gen_missing_scenario_exits_2() {
    let output = run(&[
        "gen",
        "--scenario",
        "/nonexistent/nope.toml",
        "--out",
        "/tmp/unused-satflow",
    ]);
    assert_exit(&output, 2);
    assert!(!output.stderr.is_empty());
}

fn featurize(repr: &str, out_name: &str, extra: &[&str]) -> PathBuf {
    let out = workspace().join(out_name);
    let mut args = vec![
        "featurize",
        "--data",
        data_dir().to_str().unwrap(),
        "--repr",
        repr,
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let output = run(&args);
    assert_exit(&output, 0);
    out
}

fn raw_dataset() -> &'static Path {
    static P: OnceLock<PathBuf> = OnceLock::new();
    P.get_or_init(|| featurize("raw", "raw.csv", &["--norm", "minmax"]))
}

fn table_dataset_path() -> &'static Path {
    static P: OnceLock<PathBuf> = OnceLock::new();
    P.get_or_init(|| featurize("table", "table.csv", &[]))
}

#[test]
fn featurize_raw_has_sample_columns() {
    let header = std::fs::read_to_string(raw_dataset())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let cols: Vec<&str> = header.split(',').collect();
    assert_eq!(cols.len(), 51, "50 sample columns plus label");
    assert_eq!(cols[0], "s0");
    assert_eq!(cols[49], "s49");
    assert_eq!(cols[50], "label");
}

#[test]
fn featurize_table_has_twelve_features() {
    let header = std::fs::read_to_string(table_dataset_path())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(
        header,
        "n_udp_avg,t_w,ln_p25,ln_p50,ln_p75,ln_p90,dt_p25,dt_p50,dt_p75,dt_p90,n_c2s,n_s2c,label"
    );
}

#[test]
fn featurize_logs_flows_too_short() {
    // hand-built data dir with one short flow and one long flow
    let dir = workspace().join("short-data");
    std::fs::create_dir_all(dir.join("traces")).unwrap();
    let mut long = String::from("timestamp_s,direction,length_bytes,flow_id\n");
    for i in 0..140 {
        long.push_str(&format!("{},S2C,500,long\n", i as f64 * 0.05));
    }
    std::fs::write(dir.join("traces/long.csv"), long).unwrap();
    std::fs::write(
        dir.join("traces/short.csv"),
        "timestamp_s,direction,length_bytes,flow_id\n0.0,S2C,500,short\n0.5,C2S,100,short\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("labels.csv"),
        "flow_id,label\nlong,video_conference\nshort,progressive_streaming\n",
    )
    .unwrap();

    let out = dir.join("ds.csv");
    let output = run(&[
        "featurize",
        "--data",
        dir.to_str().unwrap(),
        "--repr",
        "table",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("excluded 1 flows"), "stderr: {stderr}");
}

#[test]
fn train_writes_model_json_and_manifest() {
    let model_path = workspace().join("model.json");
    let output = run(&[
        "train",
        "--dataset",
        table_dataset_path().to_str().unwrap(),
        "--model",
        "rf:trees=10,depth=6,leaves=32",
        "--seed",
        "3",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(model_path.exists());
    assert!(workspace().join("model.json.manifest.json").exists());
    let text = std::fs::read_to_string(&model_path).unwrap();
    assert!(text.contains("format_version"));
}

#[test]
fn train_rejects_unknown_model_family() {
    let output = run(&[
        "train",
        "--dataset",
        table_dataset_path().to_str().unwrap(),
        "--model",
        "boost:trees=5",
        "--out",
        workspace().join("never.json").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(!workspace().join("never.json").exists());
}

#[test]
fn eval_cv_writes_report_and_summary() {
    let out = workspace().join("cv.json");
    let summary = workspace().join("cv-summary.csv");
    let output = run(&[
        "eval-cv",
        "--dataset",
        raw_dataset().to_str().unwrap(),
        "--models",
        "knn:k=1;rf:trees=5,depth=4,leaves=16",
        "--repeats",
        "10",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
    let lines = std::fs::read_to_string(&summary).unwrap().lines().count();
    assert_eq!(lines, 3, "header plus one row per model");
}

#[test]
fn eval_cv_rejects_tiny_datasets() {
    let tiny = workspace().join("tiny-ds.csv");
    std::fs::write(
        &tiny,
        "a,b,label\n1,2,progressive_streaming\n3,4,video_conference\n",
    )
    .unwrap();
    let out = workspace().join("cv-tiny.json");
    let output = run(&[
        "eval-cv",
        "--dataset",
        tiny.to_str().unwrap(),
        "--models",
        "knn:k=1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(!out.exists(), "partial outputs must be removed on failure");
}

#[test]
fn eval_cross_row_count_and_mismatch_error() {
    let out = workspace().join("cross.json");
    let csv = workspace().join("cross.csv");
    let output = run(&[
        "eval-cross",
        "--train-dataset",
        raw_dataset().to_str().unwrap(),
        "--test-dataset",
        raw_dataset().to_str().unwrap(),
        "--norms",
        "minmax,stdnorm",
        "--models",
        "knn:k=1;knn:k=3",
        "--out",
        out.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 5, "header plus |grid| x |norms| rows");

    // mismatched column counts: table vs raw
    let out2 = workspace().join("cross-bad.json");
    let output = run(&[
        "eval-cross",
        "--train-dataset",
        raw_dataset().to_str().unwrap(),
        "--test-dataset",
        table_dataset_path().to_str().unwrap(),
        "--models",
        "knn:k=1",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(!out2.exists());
}

#[test]
fn rank_emits_ranking_and_subsets() {
    let out = workspace().join("ranking.csv");
    let subsets = workspace().join("subsets.csv");
    let output = run(&[
        "rank",
        "--dataset",
        table_dataset_path().to_str().unwrap(),
        "--bins",
        "6",
        "--out",
        out.to_str().unwrap(),
        "--subsets",
        subsets.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let ranking = std::fs::read_to_string(&out).unwrap();
    assert_eq!(ranking.lines().count(), 13, "header plus 12 features");
    assert!(ranking.starts_with("feature,weight,rank\n"));
    let subset_lines = std::fs::read_to_string(&subsets).unwrap().lines().count();
    assert_eq!(subset_lines, 4096, "header plus 2^12 - 1 subsets");
}

#[test]
fn rank_rejects_missing_dataset() {
    let output = run(&[
        "rank",
        "--dataset",
        "/nonexistent/ds.csv",
        "--out",
        workspace().join("never-rank.csv").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn ablate_emits_long_form_table() {
    let out = workspace().join("ablation.csv");
    let output = run(&[
        "ablate",
        "--dataset",
        table_dataset_path().to_str().unwrap(),
        "--models",
        "knn:k=1",
        "--repeats",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let lines = std::fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(lines, 16, "header plus 15 deleted subsets x 1 model");
}

#[test]
fn ablate_rejects_raw_datasets_without_features() {
    // raw datasets lack the essential feature names
    let output = run(&[
        "ablate",
        "--dataset",
        raw_dataset().to_str().unwrap(),
        "--models",
        "knn:k=1",
        "--repeats",
        "3",
        "--out",
        workspace().join("never-abl.csv").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
    assert!(!workspace().join("never-abl.csv").exists());
}

#[test]
fn verify_reports_conformance() {
    // train a model on the table dataset, then verify the same trace dir
    let model_path = workspace().join("verify-model.json");
    let output = run(&[
        "train",
        "--dataset",
        table_dataset_path().to_str().unwrap(),
        "--model",
        "rf:trees=15,depth=8,leaves=64",
        "--seed",
        "9",
        "--out",
        model_path.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);

    let pvd = workspace().join("pvd.toml");
    std::fs::write(
        &pvd,
        r#"
[[descriptor]]
prefix = "tiny-stream"
class = "progressive_streaming"
mean_bitrate_max = 4.0e6
burst_bytes_max = 2000000

[[descriptor]]
prefix = "tiny-conf"
class = "video_conference"
mean_bitrate_max = 4.0e6
burst_bytes_max = 2000000
"#,
    )
    .unwrap();

    let out = workspace().join("conformance.json");
    let output = run(&[
        "verify",
        "--data",
        data_dir().to_str().unwrap(),
        "--pvd",
        pvd.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["summary"]["flows"], 4);
    assert_eq!(report["summary"]["unmatched"], 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("flows: 4"));
}

#[test]
fn report_digest_lists_manifests() {
    let _ = raw_dataset();
    let output = run(&["report", "--dir", data_dir().to_str().unwrap()]);
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("command `gen`"));

    let empty = workspace().join("empty-dir");
    std::fs::create_dir_all(&empty).unwrap();
    let output = run(&["report", "--dir", empty.to_str().unwrap()]);
    assert_exit(&output, 2);
}
