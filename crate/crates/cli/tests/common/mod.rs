//! Helpers that drive the `srcsel` binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn srcsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srcsel"))
        .args(args)
        .output()
        .expect("failed to start srcsel")
}

/// Runs `srcsel` and panics with its stderr unless it succeeds.
pub fn srcsel_ok(args: &[&str]) {
    let out = srcsel(args);
    assert!(
        out.status.success(),
        "srcsel {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Overrides for a small and fast synthetic benchmark.
pub const SMALL: &[&str] = &[
    "--set",
    "synth.n_subjects=6",
    "--set",
    "synth.trials_per_class=12",
    "--set",
    "rpa.rotation_restarts=0",
    "--set",
    "rpa.rotation_tol=1e-6",
    "--set",
    "subject_folds=3",
    "--set",
    "train.max_epochs=20",
];

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("non-UTF-8 temp path")
}

/// Every step from synthesis to the sweep, under `dir`, with the given extra
/// global arguments.
pub fn pipeline(dir: &Path, extra: &[&str]) {
    let data = dir.join("data.covset.json.gz");
    let matrix = dir.join("matrix");
    let features = dir.join("features.csv");
    let models = dir.join("models");
    let with = |cmd: &[&str]| {
        let mut args: Vec<&str> = SMALL.to_vec();
        args.extend(extra);
        args.extend(cmd);
        srcsel_ok(&args);
    };
    with(&["synth", "--out", path_str(&data)]);
    with(&[
        "stats",
        "--data",
        path_str(&data),
        "--out",
        path_str(&dir.join("stats.json")),
    ]);
    with(&["matrix", "--data", path_str(&data), "--out", path_str(&matrix)]);
    let matrix_json = matrix.join("accuracy_matrix.json");
    with(&[
        "features",
        "--data",
        path_str(&data),
        "--matrix",
        path_str(&matrix_json),
        "--out",
        path_str(&features),
    ]);
    with(&[
        "train-predictor",
        "--features",
        path_str(&features),
        "--out",
        path_str(&models),
    ]);
    for (cmd, out) in [("compare", "compare"), ("sweep", "sweep")] {
        with(&[
            cmd,
            "--data",
            path_str(&data),
            "--models",
            path_str(&models),
            "--matrix",
            path_str(&matrix_json),
            "--features",
            path_str(&features),
            "--out",
            path_str(&dir.join(out)),
        ]);
    }
}

/// Contents of every file below `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}
