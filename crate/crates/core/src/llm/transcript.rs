//! Append-only call transcript: one record per completion attempt,
//! including failed attempts.

use crate::error::Result;
use crate::util::Clock;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: u64,
    pub tag: String,
    pub timestamp_ms: u64,
    pub request_hash: String,
    /// 1-based attempt index within one logical call.
    pub attempt: u32,
    /// "ok", or "error:<status-or-kind>" for failed attempts.
    pub status: String,
    pub response_text: String,
}

/// Serializes writes so concurrent callers interleave whole records.
pub struct Transcript {
    clock: Arc<dyn Clock>,
    seq: AtomicU64,
    records: Mutex<Vec<TranscriptRecord>>,
    sink: Mutex<Option<std::io::BufWriter<std::fs::File>>>,
    path: Option<PathBuf>,
}

impl Transcript {
    /// In-memory transcript (tests and ephemeral calls).
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            seq: AtomicU64::new(0),
            records: Mutex::new(Vec::new()),
            sink: Mutex::new(None),
            path: None,
        }
    }

    /// Transcript mirrored to a JSONL file, appending if it exists.
    pub fn to_file(clock: Arc<dyn Clock>, path: &Path) -> Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(Self {
            clock,
            seq: AtomicU64::new(0),
            records: Mutex::new(Vec::new()),
            sink: Mutex::new(Some(std::io::BufWriter::new(file))),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(
        &self,
        tag: &str,
        request_hash: &str,
        attempt: u32,
        status: &str,
        response_text: &str,
    ) {
        let record = TranscriptRecord {
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            tag: tag.to_string(),
            timestamp_ms: self.clock.now_ms(),
            request_hash: request_hash.to_string(),
            attempt,
            status: status.to_string(),
            response_text: response_text.to_string(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        let mut records = self.records.lock().expect("transcript lock");
        if let Some(sink) = self.sink.lock().expect("sink lock").as_mut() {
            let _ = writeln!(sink, "{line}");
            let _ = sink.flush();
        }
        records.push(record);
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.records.lock().expect("transcript lock").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records whose tag equals `tag` or starts with `tag:`.
    pub fn records_tagged(&self, tag: &str) -> Vec<TranscriptRecord> {
        let prefix = format!("{tag}:");
        self.records()
            .into_iter()
            .filter(|r| r.tag == tag || r.tag.starts_with(&prefix))
            .collect()
    }

    pub fn count_tagged(&self, tag: &str) -> usize {
        self.records_tagged(tag).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::LogicalClock;

    #[test]
    fn appends_are_sequenced_and_filterable() {
        let transcript = Transcript::in_memory(Arc::new(LogicalClock::new()));
        transcript.append("review", "h1", 1, "ok", "a");
        transcript.append("expert_qa:physics", "h2", 1, "ok", "b");
        transcript.append("review", "h3", 2, "error:429", "too many requests");
        assert_eq!(transcript.len(), 3);
        assert_eq!(transcript.count_tagged("review"), 2);
        assert_eq!(transcript.count_tagged("expert_qa"), 1);
        let records = transcript.records();
        assert_eq!(records[0].seq, 0);
        assert_eq!(records[2].seq, 2);
    }

    #[test]
    fn file_mirroring_writes_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let transcript = Transcript::to_file(Arc::new(LogicalClock::new()), &path).unwrap();
        transcript.append("t", "h", 1, "ok", "text");
        let content = std::fs::read_to_string(&path).unwrap();
        let parsed: TranscriptRecord = serde_json::from_str(content.trim()).unwrap();
        assert_eq!(parsed.tag, "t");
        assert_eq!(parsed.response_text, "text");
    }
}
