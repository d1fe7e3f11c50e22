//! Result bundles: files staged in a temporary directory, listed with their
//! checksums in `manifest.json`, then moved into place in one rename.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_LOG: &str = "error.log";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub dt: Option<f64>,
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Wall clock, or `SOURCE_DATE_EPOCH` when set so bundles are byte-stable.
pub fn timestamp() -> String {
    let t = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map_or_else(SystemTime::now, |s| UNIX_EPOCH + Duration::from_secs(s));
    humantime::format_rfc3339_seconds(t).to_string()
}

/// Output files collected in memory until the run succeeds.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    /// Writes every file plus the manifest next to `out`, then renames the
    /// staging directory onto `out`. A previous bundle at `out` is replaced.
    pub fn promote(mut self, out: &Path, mut manifest: Manifest) -> CliResult<()> {
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        manifest.files = self
            .files
            .iter()
            .map(|(n, b)| FileEntry {
                path: n.clone(),
                sha256: sha256_hex(b),
                bytes: b.len(),
            })
            .collect();
        let parent = parent_dir(out);
        std::fs::create_dir_all(&parent)?;
        let staging = tempfile::Builder::new().prefix(".jamleg-").tempdir_in(&parent)?;
        for (name, bytes) in &self.files {
            std::fs::write(staging.path().join(name), bytes)?;
        }
        let json = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)? + "\n";
        std::fs::write(staging.path().join(MANIFEST), json)?;
        clear_previous(out)?;
        let staged = staging.keep();
        if let Err(e) = std::fs::rename(&staged, out) {
            let _ = std::fs::remove_dir_all(&staged);
            return Err(e.into());
        }
        Ok(())
    }
}

fn parent_dir(out: &Path) -> PathBuf {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Removes an earlier bundle or an empty directory at `out`; anything else is
/// left alone and reported.
fn clear_previous(out: &Path) -> CliResult<()> {
    if !out.exists() {
        return Ok(());
    }
    let is_bundle = out.join(MANIFEST).is_file() || out.join(ERROR_LOG).is_file();
    let is_empty = out.is_dir() && std::fs::read_dir(out)?.next().is_none();
    if out.is_dir() && (is_bundle || is_empty) {
        std::fs::remove_dir_all(out)?;
        return Ok(());
    }
    Err(CliError::Usage(format!(
        "{} exists and is not a result bundle; refusing to overwrite",
        out.display()
    )))
}

/// Leaves `error.log` at `out` when nothing else lives there.
pub fn write_error_log(out: &Path, message: &str) {
    let fresh = !out.exists() || out.join(ERROR_LOG).is_file() && !out.join(MANIFEST).exists();
    let empty = out.is_dir() && std::fs::read_dir(out).map(|mut d| d.next().is_none()).unwrap_or(false);
    if (fresh || empty) && std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join(ERROR_LOG), format!("{message}\n"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            tool: "jamleg".into(),
            version: "0".into(),
            command: "test".into(),
            seed: 1,
            dt: None,
            config_sha256: sha256_hex(b"{}"),
            started: "s".into(),
            finished: "f".into(),
            files: Vec::new(),
        }
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn promote_replaces_previous_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let mut b = Bundle::default();
        b.add("b.csv", "x\n");
        b.add("a.csv", "y\n");
        b.promote(&out, manifest()).unwrap();
        let text = std::fs::read_to_string(out.join(MANIFEST)).unwrap();
        assert!(text.find("a.csv").unwrap() < text.find("b.csv").unwrap());
        let mut again = Bundle::default();
        again.add("c.csv", "z\n");
        again.promote(&out, manifest()).unwrap();
        assert!(!out.join("a.csv").exists() && out.join("c.csv").exists());
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn refuses_foreign_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("notes.txt"), "keep").unwrap();
        let err = Bundle::default().promote(dir.path(), manifest()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(dir.path().join("notes.txt").exists());
    }
}
