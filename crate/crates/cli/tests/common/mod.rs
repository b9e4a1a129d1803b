#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mentalgen"));
    cmd.env_remove("RUST_LOG");
    cmd
}

/// Runs the binary and fails the test with its stderr if it exits non-zero.
pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "mentalgen {args:?} failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

/// The JSON error line; log records may precede it on stderr.
pub fn json_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap_or_default()).unwrap()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Training data, a model trained on it and held-out data from another seed.
pub struct Fixture {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub train: PathBuf,
    pub held: PathBuf,
    pub model: PathBuf,
}

pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let train = root.join("train");
        let held = root.join("held");
        let model = root.join("model.json");
        ok(&["synth", "--out", p(&train), "--per-class", "12", "--duration", "6", "--seed", "7"]);
        ok(&["synth", "--out", p(&held), "--per-class", "2", "--duration", "4", "--seed", "1001"]);
        ok(&["train", "--dataset", p(&train), "--out", p(&model), "--folds", "3"]);
        Fixture { _dir: dir, root, train, held, model }
    })
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// (file, command) of every segment in a dataset directory.
pub fn segments(dir: &Path) -> Vec<(PathBuf, String)> {
    let ds = read_json(&dir.join("dataset.json"));
    ds["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (dir.join(s["file"].as_str().unwrap()), s["label"]["command"].as_str().unwrap().to_string()))
        .collect()
}
