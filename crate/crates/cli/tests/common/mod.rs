#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Runs the CLI in-process; returns the exit code and captured stdout.
pub fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["promptmap"];
    argv.extend_from_slice(args);
    let code = promptmap_cli::run_with(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A couch (labelled couch, then sofa) and a table, orbited in 12 frames.
pub const SMALL_SPEC: &str = r#"{
  "seed": 3,
  "scene": {
    "objects": [
      {"shape": {"type": "box", "size": [1.0, 0.55, 0.5]}, "center": [1.3, 1.2, 0.25], "yaw_deg": 12.0,
       "category": "couch", "labels": ["couch", "sofa"]},
      {"shape": {"type": "box", "size": [0.5, 0.5, 0.45]}, "center": [2.1, 2.0, 0.225], "yaw_deg": -20.0,
       "category": "table"}
    ]
  },
  "trajectory": {"type": "room_scan", "frames": 12}
}"#;

/// Writes `spec` and generates the corpus into `dir/corpus`; returns the
/// manifest path.
pub fn make_corpus(dir: &Path, spec: &str) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let out = dir.join("corpus");
    let (code, stdout) = cli(&["synth", s(&spec_path), "--out", s(&out)]);
    assert_eq!(code, 0, "synth failed: {stdout}");
    out.join("manifest.json")
}

/// Every file of a directory, sorted by name, with its bytes.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}
