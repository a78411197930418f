//! Append-only batch checkpoints: one JSON record per completed request,
//! `{"index": n, "content": "…"}`, flushed on every write so a killed run
//! never re-pays for finished calls.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub index: u64,
    pub content: String,
}

fn checkpoint_err(path: &Path, message: impl std::fmt::Display) -> GatewayError {
    GatewayError::Checkpoint {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

/// Loads completed entries; a missing file is an empty checkpoint. Corrupt
/// lines are errors — a damaged checkpoint should be deleted deliberately,
/// not silently half-used.
pub fn load(path: &Path) -> Result<HashMap<u64, String>, GatewayError> {
    let file = match File::open(path) {
        Ok(file) => file,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(e) => return Err(checkpoint_err(path, e)),
    };
    let mut entries = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| checkpoint_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CheckpointEntry = serde_json::from_str(&line)
            .map_err(|e| checkpoint_err(path, format!("line {}: {e}", idx + 1)))?;
        entries.insert(entry.index, entry.content);
    }
    Ok(entries)
}

/// Appends entries to a checkpoint file, flushing after every record.
pub struct CheckpointWriter {
    file: File,
    path: std::path::PathBuf,
}

impl CheckpointWriter {
    pub fn open(path: &Path) -> Result<CheckpointWriter, GatewayError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| checkpoint_err(path, e))?;
        Ok(CheckpointWriter {
            file,
            path: path.to_owned(),
        })
    }

    pub fn append(&mut self, index: u64, content: &str) -> Result<(), GatewayError> {
        let entry = CheckpointEntry {
            index,
            content: content.to_owned(),
        };
        let line = serde_json::to_string(&entry)
            .map_err(|e| checkpoint_err(&self.path, e))?;
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.write_all(b"\n"))
            .and_then(|_| self.file.flush())
            .map_err(|e| checkpoint_err(&self.path, e))
    }
}
