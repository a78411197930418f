//! JSONL stage files with a one-line header record.
//!
//! Every inter-stage file starts with `{"schema":"<name>","version":1}`
//! followed by one JSON record per line. Readers verify the header; the
//! looser readers for user-supplied files (predictions, gold) merely skip a
//! header when one is present.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Record {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: expected schema {expected:?}, found {found:?}")]
    SchemaMismatch {
        path: String,
        expected: String,
        found: Option<String>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> JsonlError + '_ {
    move |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// True iff the line parses as a header record.
pub fn is_header_line(line: &str) -> bool {
    serde_json::from_str::<Header>(line).is_ok()
}

/// Writes a header plus one record per line. The parent directory must
/// exist. Equal inputs produce byte-identical files.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    schema: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<(), JsonlError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    let header = Header {
        schema: schema.to_owned(),
        version: VERSION,
    };
    // serde_json::to_string is infallible for our record types (no maps with
    // non-string keys, no non-finite floats reach stage files), but keep the
    // error path honest rather than unwrapping.
    let mut write_line = |line: Result<String, serde_json::Error>| -> Result<(), JsonlError> {
        let line = line.map_err(|e| JsonlError::Record {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(line.as_bytes()).map_err(io_err(path))?;
        writer.write_all(b"\n").map_err(io_err(path))
    };
    write_line(serde_json::to_string(&header))?;
    for record in records {
        write_line(serde_json::to_string(&record))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Reads a stage file written by [`write_jsonl`], verifying the header
/// schema and decoding every following line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut header_seen = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            let header: Option<Header> = serde_json::from_str(&line).ok();
            match header {
                Some(h) if h.schema == schema => continue,
                found => {
                    return Err(JsonlError::SchemaMismatch {
                        path: path.display().to_string(),
                        expected: schema.to_owned(),
                        found: found.map(|h| h.schema),
                    })
                }
            }
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Record {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    if !header_seen {
        return Err(JsonlError::SchemaMismatch {
            path: path.display().to_string(),
            expected: schema.to_owned(),
            found: None,
        });
    }
    Ok(records)
}
