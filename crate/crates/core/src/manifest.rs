//! Run manifests: everything needed to repeat a run and check that it
//! reproduced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::modeling::EpochRecord;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{name} ({path}) changed since the manifest was written: expected sha256 {expected}, found {found}")]
    HashMismatch {
        name: String,
        path: String,
        expected: String,
        found: String,
    },
}

/// Content fingerprint of one input or output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub path: String,
    pub sha256: String,
}

impl Fingerprint {
    pub fn of_file(path: &Path) -> Result<Self, ManifestError> {
        Ok(Fingerprint {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }

    pub fn verify(&self, name: &str) -> Result<(), ManifestError> {
        let found = sha256_file(Path::new(&self.path))?;
        if found != self.sha256 {
            return Err(ManifestError::HashMismatch {
                name: name.to_string(),
                path: self.path.clone(),
                expected: self.sha256.clone(),
                found,
            });
        }
        Ok(())
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, ManifestError> {
    let io_err = |source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Effective configuration after defaults and flag overrides.
    pub config: Value,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default)]
    pub inputs: BTreeMap<String, Fingerprint>,
    #[serde(default)]
    pub outputs: BTreeMap<String, Fingerprint>,
    #[serde(default)]
    pub metric_curves: BTreeMap<String, Vec<EpochRecord>>,
    #[serde(default)]
    pub metrics: Value,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn new(command: &str, config: Value) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seeds: BTreeMap::new(),
            backend: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            metric_curves: BTreeMap::new(),
            metrics: Value::Null,
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<(), ManifestError> {
        self.inputs.insert(name.to_string(), Fingerprint::of_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, name: &str, path: &Path) -> Result<(), ManifestError> {
        self.outputs.insert(name.to_string(), Fingerprint::of_file(path)?);
        Ok(())
    }

    /// Fails on the first input whose content no longer matches.
    pub fn verify_inputs(&self) -> Result<(), ManifestError> {
        for (name, fp) in &self.inputs {
            fp.verify(name)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        let text = serde_json::to_string_pretty(self).map_err(|source| ManifestError::Json {
            path: path.display().to_string(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ManifestError::Json {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn file_hash_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), sha256_bytes(b"abc"));
        let mut m = RunManifest::new("test", serde_json::json!({"a": 1}));
        m.add_input("x", &p).unwrap();
        m.verify_inputs().unwrap();
        std::fs::write(&p, b"abd").unwrap();
        assert!(matches!(m.verify_inputs(), Err(ManifestError::HashMismatch { .. })));
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("sweep", serde_json::json!({"lr": 1e-5}));
        m.seeds.insert("split".into(), 7);
        m.metrics = serde_json::json!({"accuracy": 0.1 + 0.2});
        m.metric_curves.insert(
            "fold_0".into(),
            vec![EpochRecord {
                epoch: 1,
                train_loss: std::f64::consts::PI,
                metric: 1.0 / 3.0,
            }],
        );
        let p = dir.path().join(RunManifest::FILE);
        m.save(&p).unwrap();
        assert_eq!(RunManifest::load(&p).unwrap(), m);
    }
}
