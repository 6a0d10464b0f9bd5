//! Run manifest: the audit record of one output directory. Every artifact a
//! command produces is listed with its SHA-256, together with the resolved
//! configuration snapshot and wall-clock timings. Reruns with identical
//! inputs must reproduce every artifact hash (timings may differ).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub created_unix: u64,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
    pub timings_ms: BTreeMap<String, u128>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl RunManifest {
    pub fn new(seed: u64, config: BTreeMap<String, String>) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seed,
            config,
            artifacts: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    /// Loads the manifest of an output directory, or starts a fresh one.
    pub fn load_or_new(out: &Path, seed: u64, config: BTreeMap<String, String>) -> RunManifest {
        let path = out.join(MANIFEST_NAME);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(mut m) = serde_json::from_str::<RunManifest>(&text) {
                m.seed = seed;
                m.config = config;
                return m;
            }
        }
        RunManifest::new(seed, config)
    }

    /// Hashes a file that was just written and records it under `name`.
    pub fn record_artifact(&mut self, name: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                path: path.display().to_string(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn record_timing(&mut self, name: &str, millis: u128) {
        self.timings_ms.insert(name.to_string(), millis);
    }

    pub fn save(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip_and_artifact_hashing() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("artifact.txt");
        std::fs::write(&file, "payload").unwrap();

        let mut m = RunManifest::new(7, BTreeMap::new());
        m.record_artifact("artifact", &file).unwrap();
        m.record_timing("step", 123);
        m.save(dir.path()).unwrap();

        let loaded = RunManifest::load_or_new(dir.path(), 7, BTreeMap::new());
        assert_eq!(loaded.artifacts["artifact"], m.artifacts["artifact"]);
        assert_eq!(loaded.timings_ms["step"], 123);

        std::fs::write(&file, "different").unwrap();
        let mut m2 = RunManifest::new(7, BTreeMap::new());
        m2.record_artifact("artifact", &file).unwrap();
        assert_ne!(m.artifacts["artifact"].sha256, m2.artifacts["artifact"].sha256);
    }
}
