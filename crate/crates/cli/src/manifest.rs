//! Reproducibility record written at the end of every command.
//!
//! The manifest is written last and atomically (temporary file plus rename),
//! so its presence means every listed output is complete.

use crate::error::CliResult;
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Hex SHA-256 of the raw config bytes.
pub fn config_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub checks: BTreeMap<String, CheckResult>,
    pub failure: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config_bytes: &[u8], seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            config_hash: config_hash(config_bytes),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            started: timestamp(),
            finished: String::new(),
            outputs: Vec::new(),
            checks: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn check(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.insert(
            name.to_string(),
            CheckResult {
                pass: value <= tolerance,
                value,
                tolerance,
            },
        );
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Stamps the end time and writes `dir/manifest.json`, keeping only
    /// outputs that exist.
    pub fn finish(mut self, dir: &Path) -> CliResult<PathBuf> {
        self.finished = timestamp();
        self.outputs.retain(|p| dir.join(p).is_file());
        let text = serde_json::to_string_pretty(&self).map_err(|e| crate::CliError::Runtime(e.to_string()))?;
        let tmp = dir.join(format!("{MANIFEST_NAME}.tmp"));
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_existing_outputs_only() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let mut m = RunManifest::new("run", Path::new("c.toml"), b"", 1);
        m.outputs = vec!["a.csv".into(), "missing.bin".into()];
        m.check("mass", 1e-14, 1e-10);
        m.check("energy", 1.0, 0.5);
        assert_eq!(m.failed_checks(), vec!["energy".to_string()]);
        let path = m.finish(dir.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(v["outputs"], serde_json::json!(["a.csv"]));
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }
}
