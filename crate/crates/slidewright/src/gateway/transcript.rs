//! Transcript files: JSON-lines records of every raw agent response, keyed
//! by content-addressed request digests, enabling deterministic replay.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, GatewayError};

/// How a transcript is being used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptMode {
    Record,
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub digest: String,
    pub agent: String,
    pub attempt: u32,
    pub response: String,
    pub recorded_at_unix: u64,
    /// Integrity checksum over digest + response; verified on load.
    pub checksum: String,
}

impl TranscriptEntry {
    pub fn new(digest: String, agent: String, attempt: u32, response: String) -> Self {
        let checksum = entry_checksum(&digest, &response);
        let recorded_at_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        TranscriptEntry {
            digest,
            agent,
            attempt,
            response,
            recorded_at_unix,
            checksum,
        }
    }
}

fn entry_checksum(digest: &str, response: &str) -> String {
    sha256_hex(format!("{}\n{}", digest, response).as_bytes())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AgentTranscript {
    pub entries: Vec<TranscriptEntry>,
}

impl AgentTranscript {
    /// Load a JSON-lines transcript, verifying per-entry checksums.
    /// An empty file is an empty transcript.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path)?;
        let reader = BufReader::new(file);
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry =
                serde_json::from_str(&line).map_err(|e| GatewayError::CorruptTranscript {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if entry_checksum(&entry.digest, &entry.response) != entry.checksum {
                return Err(GatewayError::CorruptTranscript {
                    line: idx + 1,
                    message: format!("checksum mismatch for digest {}", entry.digest),
                });
            }
            entries.push(entry);
        }
        Ok(AgentTranscript { entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let mut writer = TranscriptWriter::create(path)?;
        for entry in &self.entries {
            writer.append(entry)?;
        }
        Ok(())
    }
}

/// Append-only transcript writer; each entry is flushed as one line.
pub struct TranscriptWriter {
    out: BufWriter<File>,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        Ok(TranscriptWriter {
            out: BufWriter::new(File::create(path)?),
        })
    }

    pub fn append(&mut self, entry: &TranscriptEntry) -> Result<(), GatewayError> {
        let line = serde_json::to_string(entry).expect("transcript entries always serialize");
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}
