//! Append-only decision log.
//!
//! One record per line: eight lowercase hex digits of the CRC-32 of the JSON
//! body, a space, the JSON body, `\n`. A damaged final record (a write cut
//! short by a crash) is dropped on recovery; damage anywhere before the
//! final record is reported as corruption.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationDecision, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Decision(AnnotationDecision),
    FaultyObject { image_id: String, object_idx: usize, annotator_id: String, timestamp_ms: u64 },
}

pub fn encode_record(record: &LogRecord) -> Vec<u8> {
    let body = serde_json::to_vec(record).expect("log record serializes");
    let mut line = format!("{:08x} ", crc32fast::hash(&body)).into_bytes();
    line.extend_from_slice(&body);
    line.push(b'\n');
    line
}

fn decode_line(line: &[u8]) -> Option<LogRecord> {
    if line.len() < 10 || line[8] != b' ' {
        return None;
    }
    let crc = u32::from_str_radix(std::str::from_utf8(&line[..8]).ok()?, 16).ok()?;
    let body = &line[9..];
    if crc32fast::hash(body) != crc {
        return None;
    }
    serde_json::from_slice(body).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLog {
    pub records: Vec<LogRecord>,
    /// Byte length of the intact prefix; appends resume here.
    pub valid_len: usize,
    /// Bytes of a damaged final record that were dropped.
    pub discarded: usize,
}

/// Splits a log into records, tolerating a torn final record.
pub fn decode_log(bytes: &[u8]) -> Result<DecodedLog, ServiceError> {
    let mut records = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i);
        let line_end = end.unwrap_or(bytes.len());
        let is_last = end.is_none_or(|e| e + 1 == bytes.len());
        match (end, decode_line(&bytes[pos..line_end])) {
            (Some(e), Some(record)) => {
                records.push(record);
                pos = e + 1;
            }
            _ if is_last => {
                log::warn!("decision log: dropping damaged final record ({} bytes at offset {pos})", bytes.len() - pos);
                return Ok(DecodedLog { records, valid_len: pos, discarded: bytes.len() - pos });
            }
            _ => {
                return Err(ServiceError::CorruptLog(format!(
                    "record {} at byte {pos} is damaged and followed by more records",
                    records.len()
                )))
            }
        }
    }
    Ok(DecodedLog { records, valid_len: bytes.len(), discarded: 0 })
}

/// Appends records to the log file.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    file: File,
    len: u64,
    durable: bool,
}

impl LogWriter {
    /// Opens `path` for appending, first cutting it to `valid_len` so a torn
    /// tail is not left in front of new records.
    pub fn open(path: impl AsRef<Path>, valid_len: u64, durable: bool) -> Result<Self, ServiceError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ServiceError::io(&path, e))?;
        file.set_len(valid_len).map_err(|e| ServiceError::io(&path, e))?;
        Ok(Self { path, file, len: valid_len, durable })
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), ServiceError> {
        let line = encode_record(record);
        self.file
            .write_all(&line)
            .and_then(|_| if self.durable { self.file.sync_data() } else { Ok(()) })
            .map_err(|e| ServiceError::io(&self.path, e))?;
        self.len += line.len() as u64;
        Ok(())
    }

    /// Bytes written so far, including what was there on open.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}
