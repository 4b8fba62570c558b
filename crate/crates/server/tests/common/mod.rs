#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Run the binary against `ws` with the mock provider and a clean provider environment.
pub fn inspire(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inspire"))
        .args(args)
        .env("INSPIRE_WORKSPACE", ws)
        .env("INSPIRE_PROVIDER", "mock")
        .env_remove("INSPIRE_PROVIDER_URL")
        .env_remove("INSPIRE_PROVIDER_KEY")
        .env_remove("INSPIRE_MODEL")
        .env_remove("INSPIRE_LOG")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Run and require exit status 0; returns stdout.
pub fn ok(ws: &Path, args: &[&str]) -> String {
    let out = inspire(ws, args);
    assert!(out.status.success(), "inspire {args:?} failed: {}", stderr(&out));
    stdout(&out)
}

/// Workspace with the fixture corpus ingested and indexed.
pub fn indexed_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let apps = fixtures().join("apps.jsonl");
    ok(dir.path(), &["corpus", "ingest", apps.to_str().unwrap()]);
    ok(dir.path(), &["index", "build"]);
    dir
}
