//! Output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cmnoise_core::DerivedScales;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::settings::hex;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every effective setting, defaults included.
    pub parameters: std::collections::BTreeMap<String, String>,
    /// Hash of `parameters`; repeated in the header of each CSV.
    pub config_sha256: String,
    pub derived_scales: Option<DerivedScales>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// `ok`, `fail` (acceptance) or `error`.
    pub status: String,
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Directory writer that hashes everything it writes.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    header: Vec<(String, String)>,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), header: Vec::new(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Header lines for subsequent CSVs; must not depend on thread count or time.
    pub fn set_header(&mut self, command: &str, config_sha256: &str) {
        self.header = vec![
            ("generator".into(), format!("cmnoise {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), command.into()),
            ("config_sha256".into(), config_sha256.into()),
        ];
    }

    pub fn header(&self) -> &[(String, String)] {
        &self.header
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Write `name`, rendering into memory first so the hash matches the bytes on disk.
    pub fn write_with(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> std::io::Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// CSV whose body follows the `# key: value` header lines.
    pub fn write_csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> std::io::Result<()> {
        let header = self.header.clone();
        self.write_with(name, |w| {
            for (k, v) in &header {
                writeln!(w, "# {k}: {v}")?;
            }
            body(w)
        })
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> std::io::Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
        fs::write(self.dir.join(MANIFEST_NAME), text + "\n")
    }
}

/// Check that every listed file exists with the recorded hash, and that each
/// CSV header carries the manifest's config hash.
pub fn verify_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), String> {
    for f in &manifest.files {
        let bytes = fs::read(dir.join(&f.path)).map_err(|e| format!("{}: {e}", f.path))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(format!("{}: content hash mismatch", f.path));
        }
        if f.path.ends_with(".csv") {
            let expect = format!("# config_sha256: {}", manifest.config_sha256);
            let text = String::from_utf8_lossy(&bytes);
            if !text.lines().take_while(|l| l.starts_with('#')).any(|l| l == expect) {
                return Err(format!("{}: header hash missing or stale", f.path));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_hashes_and_replaces_duplicates() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.set_header("test", "abc");
        out.write_csv("a.csv", |w| writeln!(w, "x\n1")).unwrap();
        out.write_csv("a.csv", |w| writeln!(w, "x\n2")).unwrap();
        assert_eq!(out.files().len(), 1);
        let bytes = fs::read(tmp.path().join("a.csv")).unwrap();
        assert_eq!(out.files()[0].sha256, sha256_hex(&bytes));
        assert!(String::from_utf8(bytes).unwrap().starts_with("# generator: cmnoise"));
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
