use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphoracle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, file: &str) -> String {
    fs::read_to_string(dir.join(file)).unwrap()
}

fn run_json(dir: &Path) -> Value {
    serde_json::from_str(&read(dir, "run.json")).unwrap()
}

/// Generates a small BA-2Motifs set, extracts and trains for two epochs.
fn small_run(dir: &Path) {
    let d = dir.to_str().unwrap();
    ok(&[
        "gen-data",
        "--kind",
        "ba2motifs",
        "--count",
        "120",
        "--seed",
        "7",
        "--out-dir",
        d,
    ]);
    ok(&["extract", "--top-k", "30", "--seed", "7", "--out-dir", d]);
    ok(&["train", "--epochs", "2", "--seed", "7", "--out-dir", d]);
}

#[test]
fn gen_data_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let d = dir.path().to_str().unwrap();
        ok(&[
            "gen-data",
            "--kind",
            "ba2motifs",
            "--count",
            "1000",
            "--seed",
            "7",
            "--out-dir",
            d,
        ]);
    }
    assert_eq!(
        read(a.path(), "dataset.json"),
        read(b.path(), "dataset.json")
    );
    assert_eq!(
        run_json(a.path())["stages"]["gen-data"]["metrics"]["graphs"],
        1000
    );

    let d = a.path().to_str().unwrap();
    ok(&[
        "gen-data",
        "--kind",
        "balrp",
        "--count",
        "200",
        "--seed",
        "7",
        "--out-dir",
        d,
    ]);
    assert_eq!(
        run_json(a.path())["stages"]["gen-data"]["metrics"]["graphs"],
        200
    );
}

#[test]
fn extract_single_root_per_batch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "gen-data",
        "--kind",
        "ba2motifs",
        "--count",
        "200",
        "--seed",
        "1",
        "--out-dir",
        d,
    ]);
    ok(&[
        "extract",
        "--top-k",
        "1",
        "--batch-size",
        "50",
        "--seed",
        "1",
        "--out-dir",
        d,
    ]);
    let first = read(dir.path(), "subgraphs.json");
    let file: Value = serde_json::from_str(&first).unwrap();
    let train_graphs: usize = 160;
    assert!(file["subgraphs"].as_array().unwrap().len() <= train_graphs.div_ceil(50));
    ok(&[
        "extract",
        "--top-k",
        "1",
        "--batch-size",
        "50",
        "--seed",
        "1",
        "--out-dir",
        d,
    ]);
    assert_eq!(first, read(dir.path(), "subgraphs.json"));
}

#[test]
fn train_explain_eval_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    small_run(dir.path());
    assert_eq!(read(dir.path(), "history.csv").lines().count(), 3);

    ok(&["explain", "--top-n", "4", "--out-dir", d]);
    let csv = read(dir.path(), "explanations.csv");
    for class in ["0", "1"] {
        let rows = csv
            .lines()
            .skip(1)
            .filter(|l| l.split(',').next() == Some(class))
            .count();
        assert_eq!(rows, 4);
    }
    ok(&["explain", "--top-n", "4", "--out-dir", d]);
    assert_eq!(csv, read(dir.path(), "explanations.csv"));
    assert!(read(dir.path(), "heatmap.csv").starts_with("class,sg_"));
    ok(&["explain", "--top-n", "0", "--out-dir", d]);
    assert_eq!(read(dir.path(), "explanations.csv").lines().count(), 1);

    ok(&["eval", "--out-dir", d]);
    let report = read(dir.path(), "fidelity.csv");
    assert_eq!(report.lines().count(), 7);
    ok(&["eval", "--out-dir", d]);
    assert_eq!(report, read(dir.path(), "fidelity.csv"));
    ok(&["eval", "--levels", "1.0", "--out-dir", d]);
    let row: Vec<String> = read(dir.path(), "fidelity.csv")
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    assert_eq!(row[1], "0");

    let run = run_json(dir.path());
    for stage in ["gen-data", "extract", "train", "explain", "eval"] {
        assert!(run["stages"][stage]["config_hash"].is_string(), "{stage}");
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["train", "--lambda", "1.5", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("model.json").exists());

    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--epochs", "many"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["extract", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dataset.json"));
}

#[test]
fn pipeline_names_the_failing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let missing = dir.path().join("absent");
    let out = run(&[
        "pipeline",
        "--kind",
        "tudataset",
        "--path",
        missing.to_str().unwrap(),
        "--out-dir",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage gen-data"));
}

#[test]
fn changed_subgraphs_make_the_model_stale() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    small_run(dir.path());
    let path = dir.path().join("subgraphs.json");
    let mut file: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    file["subgraphs"].as_array_mut().unwrap().pop();
    fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out = run(&["explain", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stale"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"train": {"epochs": 3, "lambda": 0.9}, "dataset": {"count": 100}}"#,
    )
    .unwrap();
    let c = config.to_str().unwrap();
    ok(&[
        "pipeline",
        "--config",
        c,
        "--epochs",
        "2",
        "--top-k",
        "20",
        "--out-dir",
        d,
    ]);
    assert_eq!(read(dir.path(), "history.csv").lines().count(), 3);
    let run = run_json(dir.path());
    let effective = &run["stages"]["train"]["config"];
    assert_eq!(effective["train"]["epochs"], 2);
    assert_eq!(effective["train"]["lambda"], 0.9);
    assert_eq!(effective["walk"]["top_k"], 20);
    assert_eq!(effective["dataset"]["count"], 100);
    assert_eq!(run["stages"]["gen-data"]["metrics"]["graphs"], 100);
}
