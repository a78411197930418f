//! Run manifests: a per-stage accounting record written alongside pipeline
//! outputs. Every stage must satisfy the conservation identity
//! `outputs + dropped + errors == inputs`, so a manifest that validates
//! proves no unit of work silently vanished.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fnv1a64;

/// Manifest I/O and consistency errors.
#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to decode manifest: {0}")]
    Decode(String),
    #[error(
        "stage `{stage}` breaks conservation: outputs {outputs} + dropped {dropped} \
         + errors {errors} != inputs {inputs}"
    )]
    Conservation {
        stage: String,
        inputs: u64,
        outputs: u64,
        dropped: u64,
        errors: u64,
    },
}

/// Unit accounting for one pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub inputs: u64,
    pub outputs: u64,
    pub dropped: u64,
    pub errors: u64,
    /// Wall-clock duration. Informational only — two otherwise identical
    /// runs will disagree here, so determinism checks must ignore it.
    pub wall_ms: u64,
    /// Stage-specific extras (e.g. how many pairs a retrieval produced).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, u64>,
}

impl StageCounts {
    pub fn conserves(&self) -> bool {
        self.outputs + self.dropped + self.errors == self.inputs
    }
}

/// One named, ordered stage entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    #[serde(flatten)]
    pub counts: StageCounts,
}

/// The whole run: which config produced it, under which seed, and how every
/// stage accounted for its units.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    /// FNV-1a 64-bit hash of the raw config text, as 16 hex digits.
    pub config_hash: String,
    pub seed: u64,
    /// Stages in execution order.
    pub stages: Vec<StageRecord>,
}

/// Hashes raw config text the way manifests record it.
pub fn config_hash(raw_config: &str) -> String {
    format!("{:016x}", fnv1a64(raw_config.as_bytes()))
}

impl RunManifest {
    pub fn new(raw_config: &str, seed: u64) -> RunManifest {
        RunManifest {
            config_hash: config_hash(raw_config),
            seed,
            stages: Vec::new(),
        }
    }

    /// Appends a stage record, replacing an earlier record for the same
    /// stage (a resumed run re-reports the stage it re-examined).
    pub fn record_stage(&mut self, stage: &str, counts: StageCounts) {
        if let Some(existing) = self.stages.iter_mut().find(|s| s.stage == stage) {
            existing.counts = counts;
        } else {
            self.stages.push(StageRecord {
                stage: stage.to_string(),
                counts,
            });
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageCounts> {
        self.stages
            .iter()
            .find(|s| s.stage == name)
            .map(|s| &s.counts)
    }

    /// Checks the conservation identity on every stage.
    pub fn validate(&self) -> Result<(), ManifestError> {
        for record in &self.stages {
            let c = &record.counts;
            if !c.conserves() {
                return Err(ManifestError::Conservation {
                    stage: record.stage.clone(),
                    inputs: c.inputs,
                    outputs: c.outputs,
                    dropped: c.dropped,
                    errors: c.errors,
                });
            }
        }
        Ok(())
    }

    /// Writes `manifest.json` under `workdir` (pretty-printed for review).
    pub fn write(&self, workdir: &Path) -> Result<(), ManifestError> {
        let path = workdir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|err| ManifestError::Decode(err.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Reads `manifest.json` from `workdir`.
    pub fn read(workdir: &Path) -> Result<RunManifest, ManifestError> {
        let path = workdir.join("manifest.json");
        let raw = std::fs::read_to_string(&path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&raw).map_err(|err| ManifestError::Decode(err.to_string()))
    }
}
