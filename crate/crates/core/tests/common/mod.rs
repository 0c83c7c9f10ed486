#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn npseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npseg"))
        .args(args)
        .env_remove("NPSEG_WORKERS")
        .output()
        .expect("run npseg")
}

pub fn npseg_ok(args: &[&str]) -> Output {
    let out = npseg(args);
    assert!(
        out.status.success(),
        "npseg {args:?} failed with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("UTF-8 path")
}

/// Relative path → file contents of everything under `root`.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Copies the first `n` fixture patch images into `dir`.
pub fn copy_images(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    let mut names: Vec<_> = fs::read_dir(fixtures().join("images"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    assert!(names.len() >= n, "only {} fixture images", names.len());
    for p in names.into_iter().take(n) {
        fs::copy(&p, dir.join(p.file_name().unwrap())).unwrap();
    }
}

/// Asserts two output trees are byte-identical, naming the files that differ.
pub fn assert_same_tree(a: &Path, b: &Path) {
    let (ta, tb) = (tree(a), tree(b));
    let only_a: Vec<_> = ta.keys().filter(|k| !tb.contains_key(*k)).collect();
    let only_b: Vec<_> = tb.keys().filter(|k| !ta.contains_key(*k)).collect();
    let differ: Vec<_> = ta.iter().filter(|(k, v)| tb.get(*k).is_some_and(|w| w != *v)).map(|(k, _)| k).collect();
    assert!(
        only_a.is_empty() && only_b.is_empty() && differ.is_empty(),
        "trees differ: only in first {only_a:?}, only in second {only_b:?}, contents differ {differ:?}"
    );
}
