use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{JudgementEvent, ServiceError};

/// Append-only JSONL judgement log.
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Opens the log, creating it if absent, and returns its events in order.
    ///
    /// A final line without a trailing newline is a write torn by a crash; it
    /// was never acknowledged, so it is cut off. Any other unreadable line is
    /// an error.
    pub fn open(path: &Path) -> Result<(Self, Vec<JudgementEvent>), ServiceError> {
        let io = |source| ServiceError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let complete_len = text.rfind('\n').map_or(0, |i| i + 1);
        if complete_len < text.len() {
            log::warn!(
                "{}: dropping {} bytes of an unterminated final line",
                path.display(),
                text.len() - complete_len
            );
        }
        let mut events = Vec::new();
        for (i, line) in text[..complete_len].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: JudgementEvent = serde_json::from_str(line).map_err(|e| ServiceError::CorruptLog {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(e);
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if complete_len < text.len() {
            file.set_len(complete_len as u64).map_err(io)?;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            events,
        ))
    }

    /// Writes one event and syncs it to disk.
    pub fn append(&mut self, event: &JudgementEvent) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut w = BufWriter::new(&self.file);
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(|source| ServiceError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use chrono::TimeZone;

    use super::*;
    use crate::service::Payload;

    fn event(seq: u64) -> JudgementEvent {
        JudgementEvent {
            seq,
            task_id: "rel:Q1".into(),
            rater_id: "r1".into(),
            payload: Payload::Relevance { ratings: BTreeMap::new() },
            timestamp: chrono::Utc.timestamp_opt(1_700_000_000 + seq as i64, 0).unwrap(),
        }
    }

    #[test]
    fn append_then_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/events.jsonl");
        let (mut log, events) = EventLog::open(&path).unwrap();
        assert!(events.is_empty());
        log.append(&event(1)).unwrap();
        log.append(&event(2)).unwrap();
        drop(log);
        let (_, events) = EventLog::open(&path).unwrap();
        assert_eq!(events, vec![event(1), event(2)]);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let good = serde_json::to_string(&event(1)).unwrap();
        fs::write(&path, format!("{good}\n{{\"seq\":2,\"task")).unwrap();
        let (mut log, events) = EventLog::open(&path).unwrap();
        assert_eq!(events.len(), 1);
        log.append(&event(2)).unwrap();
        let (_, events) = EventLog::open(&path).unwrap();
        assert_eq!(events, vec![event(1), event(2)]);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let good = serde_json::to_string(&event(1)).unwrap();
        fs::write(&path, format!("not json\n{good}\n")).unwrap();
        assert!(matches!(EventLog::open(&path), Err(ServiceError::CorruptLog { line: 1, .. })));
    }
}
