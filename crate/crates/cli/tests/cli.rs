use std::path::{Path, PathBuf};
use std::process::Command;

use dpnn_cli::exit;

fn dpnn(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dpnn"))
        .current_dir(dir)
        .env_remove(dpnn_cli::CONFIG_DIR_ENV)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

/// Small synthetic cohort plus a short-training hyperparameter file.
fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = dpnn(
        dir.path(),
        &[
            "synth",
            "--out",
            "data.csv",
            "--labels",
            "planted.csv",
            "--n",
            "400",
            "--seed",
            "3",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    std::fs::write(dir.path().join("hyper.json"), br#"{"epochs": 5}"#).unwrap();
    let root = dir.path().to_path_buf();
    (dir, root)
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_prints_help_and_exits_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpnn(dir.path(), &[]);
    assert_eq!(code(&out), exit::USAGE);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), b"{}").unwrap();
    let out = dpnn(
        dir.path(),
        &[
            "synth", "--out", "x.csv", "--config", "cfg.json", "--n", "10",
        ],
    );
    assert_eq!(code(&out), exit::USAGE);
    let out = dpnn(
        dir.path(),
        &[
            "loso",
            "--data",
            "d.csv",
            "--study",
            "STARD",
            "--all-studies",
            "--out",
            "o.json",
        ],
    );
    assert_eq!(code(&out), exit::USAGE);
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpnn(
        dir.path(),
        &["pca", "--data", "absent.csv", "--out", "pca.json"],
    );
    assert_eq!(code(&out), exit::IO);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
    assert!(!dir.path().join("pca.json").exists());
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), b"patient_id,study\np1,STARD\n").unwrap();
    let out = dpnn(
        dir.path(),
        &["pca", "--data", "bad.csv", "--out", "pca.json"],
    );
    assert_eq!(code(&out), exit::INPUT);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn invalid_hyperparameters_are_rejected_before_training() {
    let (_dir, root) = workspace();
    std::fs::write(root.join("bad.json"), br#"{"learning_rate": -1.0}"#).unwrap();
    let out = dpnn(
        &root,
        &[
            "train", "--data", "data.csv", "--hyper", "bad.json", "--out", "m.json",
        ],
    );
    assert_eq!(code(&out), exit::INPUT);
    std::fs::write(root.join("typo.json"), br#"{"epoch": 3}"#).unwrap();
    let out = dpnn(
        &root,
        &[
            "train",
            "--data",
            "data.csv",
            "--hyper",
            "typo.json",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(code(&out), exit::INPUT);
    assert!(!root.join("m.json").exists());
}

#[test]
fn unknown_study_is_a_domain_error() {
    let (_dir, root) = workspace();
    let out = dpnn(
        &root,
        &[
            "loso",
            "--data",
            "data.csv",
            "--hyper",
            "hyper.json",
            "--study",
            "NOPE",
            "--out",
            "l.json",
        ],
    );
    assert_eq!(code(&out), exit::DOMAIN);
}

#[test]
fn relative_config_falls_back_to_config_dir() {
    let (_dir, root) = workspace();
    let configs = tempfile::tempdir().unwrap();
    std::fs::write(configs.path().join("short.json"), br#"{"epochs": 2}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dpnn"))
        .current_dir(&root)
        .env(dpnn_cli::CONFIG_DIR_ENV, configs.path())
        .args([
            "train",
            "--data",
            "data.csv",
            "--hyper",
            "short.json",
            "--out",
            "m.json",
            "--trace",
            "t.json",
        ])
        .output()
        .unwrap();
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = read_json(root.join("t.json"));
    assert_eq!(trace["result"]["epochs_run"], 2);
}

#[test]
fn outputs_carry_provenance() {
    let (_dir, root) = workspace();
    let out = dpnn(
        &root,
        &[
            "train",
            "--data",
            "data.csv",
            "--hyper",
            "hyper.json",
            "--out",
            "m.json",
            "--seed",
            "9",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let model = read_json(root.join("m.json"));
    let prov = &model["provenance"];
    assert_eq!(prov["tool"], "dpnn");
    assert_eq!(prov["seed"], 9);
    assert_eq!(prov["config_hash"].as_str().unwrap().len(), 64);

    let out = dpnn(
        &root,
        &[
            "clusters",
            "--data",
            "data.csv",
            "--model",
            "m.json",
            "--out",
            "c.json",
            "--labels-out",
            "l.csv",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let labels = std::fs::read_to_string(root.join("l.csv")).unwrap();
    assert!(labels.starts_with("# provenance:"));
    assert!(labels
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("patient_id,cluster"));
    let data = std::fs::read_to_string(root.join("data.csv")).unwrap();
    assert!(data.starts_with("# provenance:"));
}

#[test]
fn cv_reports_one_sample_per_fold_and_repeat() {
    let (_dir, root) = workspace();
    let out = dpnn(
        &root,
        &[
            "cv",
            "--data",
            "data.csv",
            "--hyper",
            "hyper.json",
            "--k",
            "3",
            "--repeats",
            "2",
            "--out",
            "cv.json",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cv = read_json(root.join("cv.json"));
    assert_eq!(cv["result"]["folds"].as_array().unwrap().len(), 6);
    assert_eq!(cv["result"]["k"], 3);
    assert_eq!(cv["result"]["repeats"], 2);
    assert!(cv["result"]["improvement"]["baseline"].is_number());
}

#[test]
fn tree_and_stats_from_cluster_labels() {
    let (_dir, root) = workspace();
    let out = dpnn(
        &root,
        &[
            "tree",
            "--data",
            "data.csv",
            "--clusters",
            "planted.csv",
            "--max-depth",
            "2",
            "--out",
            "t.json",
            "--text",
            "t.txt",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let tree = read_json(root.join("t.json"));
    assert_eq!(tree["result"]["n_classes"], 3);
    assert!(std::fs::read_to_string(root.join("t.txt"))
        .unwrap()
        .contains("<="));

    let out = dpnn(
        &root,
        &[
            "stats",
            "--data",
            "data.csv",
            "--clusters",
            "planted.csv",
            "--out",
            "s.json",
        ],
    );
    assert_eq!(
        code(&out),
        exit::OK,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn version_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpnn(dir.path(), &["--version"]);
    assert_eq!(code(&out), exit::OK);
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}
