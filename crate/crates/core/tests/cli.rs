use std::path::Path;
use std::process::{Command, Output};

fn facetpath(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facetpath"))
        .current_dir(dir)
        .args(args)
        .env("FACETPATH_MODELS__TRAIN__MAX_EPOCHS", "3")
        .env("FACETPATH_MODELS__TRAIN__PATIENCE", "2")
        .env_remove("FACETPATH_CONFIG")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn unknown_command_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!facetpath(dir.path(), &["frobnicate"]).status.success());
    assert!(!facetpath(dir.path(), &["train", "transformer"]).status.success());
}

#[test]
fn config_typos_fail() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "sed = 3\n").unwrap();
    let out = facetpath(dir.path(), &["--config", "bad.toml", "generate-data"]);
    assert!(!out.status.success());
}

#[test]
fn small_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("small.toml"),
        "[synth]\nn_products = 150\nn_sessions = 250\nbranching = [4, 3, 3]\n\n[embeddings]\nepochs = 2\n",
    )
    .unwrap();
    let run = |args: &[&str]| ok(facetpath(dir.path(), &[&["--config", "small.toml"], args].concat()));
    run(&["generate-data"]);
    for f in ["catalog.jsonl", "events.jsonl", "manifest.jsonl"] {
        assert!(dir.path().join("data").join(f).is_file(), "{f}");
    }
    run(&["train-embeddings"]);
    run(&["train", "cm"]);
    run(&["train", "sessionpath"]);
    assert!(dir.path().join("artifacts/models/sessionpath.json").is_file());
    let report = run(&["evaluate", "--model", "sessionpath"]);
    assert!(report.contains("D=last") || report.contains("last"), "{report}");
    let sweep = run(&["sweep", "--model", "sessionpath", "--ct", "0,0.5,1"]);
    assert_eq!(sweep.lines().filter(|l| l.trim_start().starts_with(|c: char| c.is_ascii_digit())).count(), 3, "{sweep}");
    let query = std::fs::read_to_string(dir.path().join("data/manifest.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(query.lines().next().unwrap()).unwrap();
    let one = run(&["predict", "--query", first["query"].as_str().unwrap(), "--ct", "0"]);
    assert!(!one.trim().is_empty());
    assert!(std::fs::read_dir(dir.path().join("artifacts/manifests")).unwrap().count() >= 5);
}
