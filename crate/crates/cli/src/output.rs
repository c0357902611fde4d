use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "dpnn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Identifies the tool, seed and full configuration behind an artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: Value,
}

impl Provenance {
    /// `config` is hashed in its compact serialization; object keys are
    /// sorted so the hash is canonical.
    pub fn new(seed: Option<u64>, config: Value) -> Self {
        let canonical = serde_json::to_string(&config).expect("json values serialize");
        let config_hash = sha256_hex(canonical.as_bytes());
        Self {
            tool: TOOL,
            version: VERSION,
            seed,
            config_hash,
            config,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// Single-line summary for CSV comments and text headers.
    pub fn summary(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "{} {} seed={} config_sha256={}",
            self.tool, self.version, seed, self.config_hash
        )
    }
}

/// Output files buffered in memory and written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    pub fn json<T: Serialize>(
        &mut self,
        path: &Path,
        prov: &Provenance,
        result: &T,
    ) -> Result<(), CliError> {
        let doc = json!({ "provenance": prov.to_value(), "result": serde_json::to_value(result)? });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        self.add(path, text.into_bytes());
        Ok(())
    }

    pub fn csv(&mut self, path: &Path, prov: &Provenance, body: Vec<u8>) {
        let mut bytes = format!("# provenance: {}\n", prov.summary()).into_bytes();
        bytes.extend(body);
        self.add(path, bytes);
    }

    pub fn text(&mut self, path: &Path, prov: &Provenance, body: &str) {
        self.add(path, format!("# {}\n{body}", prov.summary()).into_bytes());
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file; if any write fails, removes the ones already written.
    pub fn commit(self) -> Result<(), CliError> {
        for (i, (path, _)) in self.files.iter().enumerate() {
            if self.files[..i].iter().any(|(p, _)| p == path) {
                return Err(CliError::Usage(format!(
                    "output path `{}` requested twice",
                    path.display()
                )));
            }
        }
        let mut written: Vec<&Path> = Vec::new();
        for (path, bytes) in &self.files {
            if let Err(e) = fs::write(path, bytes) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(path);
                return Err(CliError::Output {
                    path: path.clone(),
                    source: e,
                });
            }
            written.push(path);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_config_only() {
        let a = Provenance::new(Some(1), json!({"b": 1, "a": [1, 2]}));
        let b = Provenance::new(Some(1), json!({"a": [1, 2], "b": 1}));
        let c = Provenance::new(Some(1), json!({"a": [1, 3], "b": 1}));
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn failed_commit_removes_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.txt");
        let bad = dir.path().join("missing").join("bad.txt");
        let mut out = Outputs::default();
        out.add(&ok, b"x".to_vec());
        out.add(&bad, b"y".to_vec());
        assert!(out.commit().is_err());
        assert!(!ok.exists());
    }

    #[test]
    fn duplicate_paths_rejected_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let mut out = Outputs::default();
        out.add(&p, b"1".to_vec());
        out.add(&p, b"2".to_vec());
        assert!(out.commit().is_err());
        assert!(!p.exists());
    }
}
