//! Shared helpers for CLI integration tests: config templating against the
//! shipped fixtures and binary invocation.
//!
//! Included by several test targets; not every target uses every helper.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct ConfigSpec<'a> {
    pub method: &'a str,
    pub seed: u64,
    pub parallelism: usize,
    pub label: &'a str,
    pub cap: usize,
    pub model_path: Option<&'a str>,
    pub failure_rate: f64,
    pub cosine_threshold: f64,
}

impl Default for ConfigSpec<'_> {
    fn default() -> Self {
        ConfigSpec {
            method: "common",
            seed: 42,
            parallelism: 1,
            label: "fixture",
            cap: 20,
            model_path: None,
            failure_rate: 0.0,
            cosine_threshold: 0.9,
        }
    }
}

/// Write a config file under `dir` pointing at the shipped fixtures, with
/// outputs under `dir`/out.
pub fn write_config(dir: &Path, spec: &ConfigSpec) -> PathBuf {
    let model_line = match spec.model_path {
        Some(path) => format!("model_path = \"{path}\"\n"),
        None => String::new(),
    };
    let failure = if spec.failure_rate > 0.0 {
        format!("failure_rate = {}\n", spec.failure_rate)
    } else {
        String::new()
    };
    let text = format!(
        r#"seed = {seed}
parallelism = {parallelism}
top_k_docs = 50
label = "{label}"
{model_line}
[paths]
input_dir = "{fixtures}"
output_dir = "out"

[providers.stage1]
kind = "mock"
model_name = "mock-stage1"
{failure}
[providers.embedding]
kind = "mock"
model_name = "mock-embed"

[providers.refine]
kind = "mock"
model_name = "mock-refine"
{failure}
[providers.criteria]
kind = "mock"
model_name = "mock-criteria"
{failure}
[providers.judge]
kind = "mock"
model_name = "mock-judge"
{failure}
[cluster]
cosine_threshold = {threshold}
verify_with_llm = true

[selection]
method = "{method}"
cap = {cap}

[wpa]
alpha = 0.05
min_topics = 2
zero_handling = "z_split"
"#,
        seed = spec.seed,
        parallelism = spec.parallelism,
        label = spec.label,
        model_line = model_line,
        fixtures = fixtures_dir().display(),
        failure = failure,
        threshold = spec.cosine_threshold,
        method = spec.method,
        cap = spec.cap,
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

pub fn nuggetbank(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_nuggetbank"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// All regular files under a directory, with their contents, keyed by
/// relative path.
pub fn snapshot_tree(root: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&dir) else {
            continue;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Compare two output trees byte-for-byte, neutralizing manifest timestamps
/// (wall-clock fields are the only intentionally nondeterministic bytes).
pub fn assert_trees_identical(a: &Path, b: &Path) {
    let ta = snapshot_tree(a);
    let tb = snapshot_tree(b);
    let keys_a: Vec<&String> = ta.keys().collect();
    let keys_b: Vec<&String> = tb.keys().collect();
    assert_eq!(keys_a, keys_b, "file sets differ between {a:?} and {b:?}");
    for (rel, bytes_a) in &ta {
        let bytes_b = &tb[rel];
        if rel.ends_with("run_manifest.json") {
            assert_eq!(
                neutralize_manifest(bytes_a),
                neutralize_manifest(bytes_b),
                "manifest {rel} differs"
            );
        } else {
            assert_eq!(bytes_a, bytes_b, "file {rel} differs");
        }
    }
}

fn neutralize_manifest(bytes: &[u8]) -> serde_json::Value {
    let mut value: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    value["started_unix_ms"] = 0.into();
    value["finished_unix_ms"] = 0.into();
    value
}
