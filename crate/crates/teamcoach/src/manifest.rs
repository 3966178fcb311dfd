//! Run manifest: what each stage produced and from which inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{read_json, sha256_file, write_json_pretty};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Hash of the resolved configuration of the latest run.
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of the stage's configuration and upstream artifact hashes.
    pub input_hash: String,
    /// Artifact path relative to the run directory, and its SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub seconds: f64,
}

impl RunManifest {
    /// The manifest of `dir`, or an empty one if none was written yet.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            read_json(&path)
        } else {
            Ok(RunManifest::default())
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json_pretty(&dir.join(MANIFEST_FILE), self)
    }

    /// The record of `stage`, after checking every artifact against its
    /// recorded hash.
    pub fn verify(&self, dir: &Path, stage: &'static str) -> Result<&StageRecord> {
        let record = self.stages.get(stage).ok_or_else(|| Error::StageNotRun {
            stage,
            dir: dir.to_path_buf(),
        })?;
        for (path, expected) in &record.artifacts {
            match sha256_file(&dir.join(path))? {
                None => {
                    return Err(Error::MissingArtifact {
                        stage,
                        path: path.clone(),
                        expected: expected.clone(),
                    })
                }
                Some(found) if &found != expected => {
                    return Err(Error::StaleArtifact {
                        stage,
                        path: path.clone(),
                        expected: expected.clone(),
                        found,
                    })
                }
                Some(_) => {}
            }
        }
        Ok(record)
    }

    /// Whether `stage` was run with `input_hash` and its artifacts are intact.
    pub fn is_current(&self, dir: &Path, stage: &'static str, input_hash: &str) -> Result<bool> {
        match self.stages.get(stage) {
            Some(r) if r.input_hash == input_hash => match self.verify(dir, stage) {
                Ok(_) => Ok(true),
                Err(Error::MissingArtifact { .. } | Error::StaleArtifact { .. }) => Ok(false),
                Err(e) => Err(e),
            },
            _ => Ok(false),
        }
    }
}
