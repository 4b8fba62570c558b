//! File persistence helpers shared by every on-disk artifact.
//!
//! Whole-file artifacts are replaced with write-temp-then-rename so a reader
//! never sees a half-written file. Line-delimited stores start with a
//! [`FormatHeader`] line; JSON documents carry a `format_version` field.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{format}: unsupported format version {found} (supported {supported})")]
    UnsupportedVersion {
        format: String,
        found: String,
        supported: String,
    },
    #[error("expected a {expected} file, found {found:?}")]
    WrongFormat { expected: String, found: String },
    #[error("corrupt file: {0}")]
    Corrupt(String),
}

/// First line of a line-delimited store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatHeader {
    pub format: String,
    pub format_version: String,
}

impl FormatHeader {
    pub fn new(format: &str, version: &str) -> Self {
        Self {
            format: format.into(),
            format_version: version.into(),
        }
    }

    /// Parse `line` as a header if it looks like one.
    pub fn sniff(line: &str) -> Option<Self> {
        let value: serde_json::Value = serde_json::from_str(line).ok()?;
        if value.get("format").is_some() && value.get("format_version").is_some() {
            serde_json::from_value(value).ok()
        } else {
            None
        }
    }

    pub fn check(&self, format: &str, supported: &str) -> Result<(), PersistError> {
        if self.format != format {
            return Err(PersistError::WrongFormat {
                expected: format.into(),
                found: self.format.clone(),
            });
        }
        check_version(format, &self.format_version, supported)
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("header serializes");
        s.push('\n');
        s
    }
}

/// Accept any version with the same major number as `supported`.
pub fn check_version(format: &str, found: &str, supported: &str) -> Result<(), PersistError> {
    let major = |v: &str| v.split('.').next().unwrap_or_default().trim().to_string();
    if major(found) != major(supported) {
        return Err(PersistError::UnsupportedVersion {
            format: format.into(),
            found: found.into(),
            supported: supported.into(),
        });
    }
    Ok(())
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Replace `path` with `bytes` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    write_atomic_with(path, bytes, || Ok(()))
}

/// [`write_atomic`] with a hook that runs after the temp file is durable and
/// before the rename. An error from the hook abandons the write, leaving the
/// previous file untouched (used to simulate crashes).
pub fn write_atomic_with<F>(path: &Path, bytes: &[u8], before_rename: F) -> Result<(), PersistError>
where
    F: FnOnce() -> io::Result<()>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = temp_path(path);
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    before_rename()?;
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        // directory fsync is best effort; not all platforms allow it
        if let Ok(dir) = File::open(parent) {
            let _ = dir.sync_all();
        }
    }
    Ok(())
}

/// Append one line to a line-delimited store, writing `header` first when
/// the file is new or empty.
pub fn append_line(path: &Path, header: &FormatHeader, line: &str) -> Result<(), PersistError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    if f.metadata()?.len() == 0 {
        buf.push_str(&header.to_line());
    }
    buf.push_str(line.trim_end_matches('\n'));
    buf.push('\n');
    f.write_all(buf.as_bytes())?;
    f.sync_data()?;
    Ok(())
}
