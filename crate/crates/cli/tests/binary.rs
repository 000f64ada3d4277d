//! The `spreadbound` binary end to end.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spreadbound"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", config("sis_two_node.json").to_str().unwrap(), "--quiet", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["report.json", "metadata.json", "traj_generic.csv", "plot_combined.csv", "traj_exact.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], serde_json::json!(true));
}

#[test]
fn oracle_runs_only_the_exact_solver() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["oracle", config("sis_two_node.json").to_str().unwrap(), "--quiet", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("traj_exact.csv").exists());
    assert!(!dir.path().join("traj_generic.csv").exists());
}

#[test]
fn validate_accepts_a_model_file() {
    let out = bin().arg("validate").arg(config("sis_path_model.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("sis_two_node.json")).unwrap().replace("\"generic\"", "\"everything\"");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("run").arg(&path).arg("--quiet").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("everything"));
    let missing = bin().arg("run").arg(dir.path().join("absent.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
