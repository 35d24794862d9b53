//! Annotation service: task assignment, judgement intake and live stats.
//!
//! The JSONL event log is the source of truth. On start the log is replayed
//! into an [`AnnotationStore`]; each accepted submission is appended and
//! synced before it is acknowledged. After every write a JSON stats snapshot
//! is refreshed next to the log for offline inspection.

mod http;
mod event_log;
mod store;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};

pub use self::http::{router, serve};
pub use self::event_log::EventLog;
pub use self::store::{
    completeness_task, relevance_task, AnnotationStore, AnnotationTask, BinaryAgreement, JudgementEvent,
    MetricTriple, ModelComparison, Payload, Progress, QuestionPayload, RawBinary, RawPayload, Stats, Submission,
    TaskItem, TaskKind,
};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown rater {0:?}")]
    UnknownRater(String),
    #[error("missing or wrong token for rater {0:?}")]
    BadToken(String),
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("event log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("event log {path} line {line}: {message}")]
    CorruptLog { path: PathBuf, line: usize, message: String },
}

/// Settings for `serve`. Every field can come from the config file; the
/// `EXPLBENCH_BIND`, `EXPLBENCH_DATA_DIR` and `EXPLBENCH_UI_DIR` variables
/// override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub bind: SocketAddr,
    /// Holds `events.jsonl` and `stats.json`.
    pub data_dir: PathBuf,
    /// Static UI bundle; the API still works without it.
    pub ui_dir: Option<PathBuf>,
    /// Distinct raters wanted per task.
    pub coverage: usize,
    /// Rater id → access token.
    pub raters: BTreeMap<String, String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            bind: ([127, 0, 0, 1], 8080).into(),
            data_dir: PathBuf::from("annotation-data"),
            ui_dir: None,
            coverage: 2,
            raters: BTreeMap::new(),
        }
    }
}

impl ServeConfig {
    pub fn apply_env(&mut self) -> anyhow::Result<()> {
        if let Ok(v) = std::env::var("EXPLBENCH_BIND") {
            self.bind = v.parse().map_err(|e| anyhow::anyhow!("EXPLBENCH_BIND={v:?}: {e}"))?;
        }
        if let Ok(v) = std::env::var("EXPLBENCH_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Ok(v) = std::env::var("EXPLBENCH_UI_DIR") {
            self.ui_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn log_path(&self) -> PathBuf {
        self.data_dir.join("events.jsonl")
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.data_dir.join("stats.json")
    }
}

/// Thread-safe wrapper: many readers, one writer at a time.
pub struct AnnotationService {
    store: RwLock<AnnotationStore>,
    log: Mutex<EventLog>,
    tokens: BTreeMap<String, String>,
    snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub ack: bool,
    pub seq: u64,
}

impl AnnotationService {
    /// Opens (or creates) the log and replays it into `store`.
    pub fn open(
        mut store: AnnotationStore,
        log_path: &Path,
        tokens: BTreeMap<String, String>,
        snapshot: Option<PathBuf>,
    ) -> Result<Self, ServiceError> {
        let (log, events) = EventLog::open(log_path)?;
        for e in events {
            store.apply(e);
        }
        let service = Self {
            store: RwLock::new(store),
            log: Mutex::new(log),
            tokens,
            snapshot,
        };
        service.write_snapshot();
        Ok(service)
    }

    /// Checks a rater's token. Raters without a configured token pass.
    pub fn authenticate(&self, rater: &str, token: Option<&str>) -> Result<(), ServiceError> {
        if !self.read().is_rater(rater) {
            return Err(ServiceError::UnknownRater(rater.to_string()));
        }
        match self.tokens.get(rater) {
            Some(expected) if Some(expected.as_str()) != token => Err(ServiceError::BadToken(rater.to_string())),
            _ => Ok(()),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, AnnotationStore> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn next_task(&self, rater: &str) -> Result<Option<AnnotationTask>, ServiceError> {
        self.read().next_task(rater)
    }

    /// Validates, persists, then applies. The log lock serializes writers so
    /// sequence numbers follow log order.
    pub fn submit(&self, sub: &Submission) -> Result<Ack, ServiceError> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let (payload, seq) = {
            let store = self.read();
            (store.validate(sub)?, store.next_seq())
        };
        let event = JudgementEvent {
            seq,
            task_id: sub.task_id.clone(),
            rater_id: sub.rater.clone(),
            payload,
            timestamp: Utc::now(),
        };
        log.append(&event)?;
        self.store.write().unwrap_or_else(|e| e.into_inner()).apply(event);
        self.write_snapshot();
        drop(log);
        Ok(Ack { ack: true, seq })
    }

    pub fn stats(&self) -> Stats {
        self.read().stats()
    }

    pub fn with_store<T>(&self, f: impl FnOnce(&AnnotationStore) -> T) -> T {
        f(&self.read())
    }

    fn write_snapshot(&self) {
        let Some(path) = &self.snapshot else { return };
        let body = serde_json::to_string_pretty(&self.stats()).expect("stats serialize");
        let tmp = path.with_extension("json.tmp");
        if let Err(e) = fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, path)) {
            log::warn!("could not write stats snapshot {}: {e}", path.display());
        }
    }
}
