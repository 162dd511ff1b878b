//! Append-only answer log, one JSON record per line.
//!
//! The log is the source of truth for a campaign: replaying it over the
//! campaign's initial state reproduces every resolution. A final line without
//! a terminating newline is a partial write and is dropped on replay.

use std::fs::{File, OpenOptions};
use std::io::{ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::domain::{Answer, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub annotator_id: String,
    pub verdict: Verdict,
    pub latency_ms: u64,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl AnswerRecord {
    pub fn new(answer: &Answer, at: DateTime<Utc>) -> Self {
        AnswerRecord {
            question_id: answer.question_id.clone(),
            annotator_id: answer.annotator_id.clone(),
            verdict: answer.verdict,
            latency_ms: answer.latency_ms,
            timestamp: at.to_rfc3339_opts(SecondsFormat::Millis, true),
        }
    }

    pub fn now(answer: &Answer) -> Self {
        Self::new(answer, Utc::now())
    }

    pub fn answer(&self) -> Answer {
        Answer {
            question_id: self.question_id.clone(),
            annotator_id: self.annotator_id.clone(),
            verdict: self.verdict,
            latency_ms: self.latency_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedTail {
    /// Zero-based index of the partial record.
    pub index: usize,
    /// Byte offset where the complete prefix ends.
    pub valid_len: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogReplay {
    pub records: Vec<AnswerRecord>,
    pub truncated: Option<TruncatedTail>,
}

/// Reads every complete record. A missing file is an empty log.
pub fn read_answer_log(path: impl AsRef<Path>) -> Result<LogReplay, FormatError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes).map_err(|e| FormatError::io(path, e))?,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(LogReplay::default()),
        Err(e) => return Err(FormatError::io(path, e)),
    };
    let mut replay = LogReplay::default();
    let mut offset = 0usize;
    let mut index = 0usize;
    while offset < bytes.len() {
        let Some(end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            replay.truncated = Some(TruncatedTail { index, valid_len: offset as u64 });
            break;
        };
        let line = &bytes[offset..offset + end];
        let record: AnswerRecord = serde_json::from_slice(line)
            .map_err(|e| FormatError::LogRecord { index, reason: e.to_string() })?;
        replay.records.push(record);
        offset += end + 1;
        index += 1;
    }
    Ok(replay)
}

/// Single-writer handle on an answer log.
#[derive(Debug)]
pub struct AnswerLog {
    path: PathBuf,
    file: File,
    sync: bool,
}

impl AnswerLog {
    /// Opens for appending, cutting off a partial trailing record if present.
    pub fn open(path: impl AsRef<Path>, truncate_to: Option<u64>) -> Result<Self, FormatError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| FormatError::io(&path, e))?;
        if let Some(len) = truncate_to {
            file.set_len(len).map_err(|e| FormatError::io(&path, e))?;
        }
        Ok(AnswerLog { path, file, sync: false })
    }

    /// Forces an fsync after every append.
    pub fn with_sync(mut self, sync: bool) -> Self {
        self.sync = sync;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &AnswerRecord) -> Result<(), FormatError> {
        let mut line = serde_json::to_vec(record)
            .map_err(|e| FormatError::LogRecord { index: 0, reason: e.to_string() })?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| FormatError::io(&self.path, e))?;
        if self.sync {
            self.file.sync_data().map_err(|e| FormatError::io(&self.path, e))?;
        }
        Ok(())
    }
}

/// Appends one answer stamped with the current time.
pub fn append_answer_log(answer: &Answer, path: impl AsRef<Path>) -> Result<(), FormatError> {
    AnswerLog::open(path, None)?.append(&AnswerRecord::now(answer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn answer(q: &str, a: &str, v: Verdict) -> Answer {
        Answer { question_id: q.into(), annotator_id: a.into(), verdict: v, latency_ms: 800 }
    }

    #[test]
    fn missing_log_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let replay = read_answer_log(dir.path().join("answers.log")).unwrap();
        assert!(replay.records.is_empty() && replay.truncated.is_none());
    }

    #[test]
    fn append_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("answers.log");
        append_answer_log(&answer("q1", "a", Verdict::Yes), &path).unwrap();
        append_answer_log(&answer("q1", "b", Verdict::No), &path).unwrap();
        let replay = read_answer_log(&path).unwrap();
        assert_eq!(replay.records.len(), 2);
        assert_eq!(replay.records[1].answer(), answer("q1", "b", Verdict::No));
        assert!(replay.records[0].timestamp.ends_with('Z'));
        DateTime::parse_from_rfc3339(&replay.records[0].timestamp).unwrap();
    }

    #[test]
    fn partial_tail_is_reported_and_cut() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("answers.log");
        for i in 0..3 {
            append_answer_log(&answer(&format!("q{i}"), "a", Verdict::Yes), &path).unwrap();
        }
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 7]).unwrap();
        let replay = read_answer_log(&path).unwrap();
        assert_eq!(replay.records.len(), 2);
        let tail = replay.truncated.clone().unwrap();
        assert_eq!(tail.index, 2);

        let mut log = AnswerLog::open(&path, Some(tail.valid_len)).unwrap();
        log.append(&AnswerRecord::now(&answer("q9", "z", Verdict::No))).unwrap();
        let replay = read_answer_log(&path).unwrap();
        assert_eq!(replay.records.len(), 3);
        assert!(replay.truncated.is_none());
        assert_eq!(replay.records[2].question_id, "q9");
    }

    #[test]
    fn corrupt_middle_record_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("answers.log");
        append_answer_log(&answer("q1", "a", Verdict::Yes), &path).unwrap();
        let mut bytes = b"not json\n".to_vec();
        bytes.extend(std::fs::read(&path).unwrap());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_answer_log(&path), Err(FormatError::LogRecord { index: 0, .. })));
    }
}
