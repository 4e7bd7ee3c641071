use std::path::{Path, PathBuf};
use std::process::Command;

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo/run.json")
}

fn epimine(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_epimine"))
        .arg("--config")
        .arg(demo_config())
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn missing_upstream_artifacts_are_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = epimine(dir.path(), &["topics"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn single_stage_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = epimine(dir.path(), &["agreement"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    assert_eq!(files, ["agreement.json", "manifest.json"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
}

#[test]
fn overrides_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = epimine(dir.path(), &["--set", "cv.k=banana", "agreement"]);
    assert_eq!(out.status.code(), Some(2));
    let out = epimine(dir.path(), &["run"]);
    assert_eq!(out.status.code(), Some(2));
}
