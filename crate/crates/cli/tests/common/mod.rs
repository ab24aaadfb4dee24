#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use patchwarp::dataset::write_dataset;
use patchwarp::geometry::ImageSize;
use patchwarp::toy::toy_dataset;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchwarp"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn toy_dir(count: usize, seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (catalog, samples) = toy_dataset(count, seed, ImageSize::square(128));
    write_dataset(dir.path(), &catalog, &samples).unwrap();
    dir
}

pub fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy-vehicle")
}

/// Relative path -> SHA-256 of every file below `root`.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(Result::unwrap)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let digest = Sha256::digest(std::fs::read(e.path()).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (rel, hex)
        })
        .collect()
}

/// One SHA-256 over all relative paths and file hashes.
pub fn tree_hash(root: &Path) -> String {
    let mut h = Sha256::new();
    for (path, file) in tree_hashes(root) {
        h.update(path.as_bytes());
        h.update([0]);
        h.update(file.as_bytes());
        h.update([0]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}
