use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::clause::{ClauseKind, Mode};

pub const AUTO_SCORER: &str = "auto";

/// One scoring task: a document, a clause and a prompting mode.
///
/// Displayed as `<doc>.<clause>.<mode>`, which is also the task id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskKey {
    pub doc_id: String,
    pub clause: ClauseKind,
    pub mode: Mode,
}

impl TaskKey {
    pub fn new(doc_id: impl Into<String>, clause: ClauseKind, mode: Mode) -> Self {
        Self { doc_id: doc_id.into(), clause, mode }
    }
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.doc_id, self.clause, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed task id `{0}`; expected <doc>.<clause>.<mode>")]
pub struct BadTaskId(pub String);

impl FromStr for TaskKey {
    type Err = BadTaskId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BadTaskId(s.to_string());
        let mut parts = s.rsplitn(3, '.');
        let mode = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let clause = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let doc = parts.next().filter(|d| !d.is_empty()).ok_or_else(bad)?;
        Ok(TaskKey::new(doc, clause, mode))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub doc_id: String,
    pub clause: ClauseKind,
    pub mode: Mode,
    /// Filled in from the store on ingestion; submitters may omit it.
    #[serde(default)]
    pub auto_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_score: Option<f64>,
    pub scorer: String,
    /// Milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
}

impl EvaluationRecord {
    pub fn manual(key: &TaskKey, score: f64, scorer: impl Into<String>) -> Self {
        Self {
            doc_id: key.doc_id.clone(),
            clause: key.clause,
            mode: key.mode,
            auto_score: 0.0,
            manual_score: Some(score),
            scorer: scorer.into(),
            timestamp: now_ms(),
        }
    }

    pub fn key(&self) -> TaskKey {
        TaskKey::new(&self.doc_id, self.clause, self.mode)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("score {score} for `{task}` is outside 0-100")]
    OutOfRange { task: String, score: f64 },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("record for `{task}` by `{scorer}` is missing a manual score")]
    NoManualScore { task: String, scorer: String },
    #[error("duplicate record for `{task}` by `{scorer}` in one submission")]
    Duplicate { task: String, scorer: String },
    #[error("scorer name `{0}` is reserved")]
    ReservedScorer(String),
    #[error("no records for {clause} / {mode}")]
    NoRecords { clause: ClauseKind, mode: Mode },
    #[error("manual score file {path} line {line}: {detail}")]
    Corrupt { path: String, line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn in_range(score: f64) -> bool {
    score.is_finite() && (0.0..=100.0).contains(&score)
}

/// Half-up rounding to two decimals (scores are never negative).
pub fn round2(value: f64) -> f64 {
    // The epsilon absorbs binary representation error such as 1.005 * 100 = 100.49999.
    ((value * 100.0) + 0.5 + 1e-9).floor() / 100.0
}

/// Per (clause, mode) aggregate inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClauseSummary {
    pub docs_evaluated: usize,
    pub manual_scored: usize,
    pub mean: Option<f64>,
}

/// Automatic scores plus durable manual scores.
///
/// Manual records are appended to a JSON-lines file and synced before
/// [`ScoreStore::ingest_manual`] returns. A later record by the same scorer
/// for the same task replaces the earlier one; when several scorers rated a
/// task, their mean is used. Manual scores always take precedence over the
/// automatic score.
#[derive(Debug, Default)]
pub struct ScoreStore {
    auto: BTreeMap<TaskKey, f64>,
    manual: BTreeMap<TaskKey, BTreeMap<String, EvaluationRecord>>,
    manual_path: Option<PathBuf>,
}

impl ScoreStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a store backed by `manual_path`, replaying any existing records.
    pub fn open(manual_path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let manual_path = manual_path.into();
        let mut store = Self { manual_path: Some(manual_path.clone()), ..Self::default() };
        if manual_path.exists() {
            let shown = manual_path.display().to_string();
            let reader = BufReader::new(File::open(&manual_path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: EvaluationRecord = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                    path: shown.clone(),
                    line: i + 1,
                    detail: e.to_string(),
                })?;
                store.apply(record);
            }
        }
        Ok(store)
    }

    pub fn manual_path(&self) -> Option<&Path> {
        self.manual_path.as_deref()
    }

    /// Registers a task and its automatic score.
    pub fn insert_auto(&mut self, key: TaskKey, score: f64) -> Result<(), StoreError> {
        if !in_range(score) {
            return Err(StoreError::OutOfRange { task: key.to_string(), score });
        }
        self.auto.insert(key, score);
        Ok(())
    }

    pub fn contains(&self, key: &TaskKey) -> bool {
        self.auto.contains_key(key)
    }

    pub fn auto_score(&self, key: &TaskKey) -> Option<f64> {
        self.auto.get(key).copied()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskKey> {
        self.auto.keys()
    }

    /// Validates the whole batch, persists it, then applies it.
    pub fn ingest_manual(&mut self, records: Vec<EvaluationRecord>) -> Result<Vec<EvaluationRecord>, StoreError> {
        let mut seen = BTreeSet::new();
        let mut accepted = Vec::with_capacity(records.len());
        for mut record in records {
            let key = record.key();
            let task = key.to_string();
            let Some(score) = record.manual_score else {
                return Err(StoreError::NoManualScore { task, scorer: record.scorer });
            };
            if !in_range(score) {
                return Err(StoreError::OutOfRange { task, score });
            }
            if record.scorer == AUTO_SCORER {
                return Err(StoreError::ReservedScorer(record.scorer));
            }
            let Some(auto) = self.auto.get(&key) else { return Err(StoreError::UnknownTask(task)) };
            if !seen.insert((key, record.scorer.clone())) {
                return Err(StoreError::Duplicate { task, scorer: record.scorer });
            }
            record.auto_score = *auto;
            if record.timestamp == 0 {
                record.timestamp = now_ms();
            }
            accepted.push(record);
        }
        self.persist(&accepted)?;
        for record in &accepted {
            self.apply(record.clone());
        }
        Ok(accepted)
    }

    fn persist(&self, records: &[EvaluationRecord]) -> Result<(), StoreError> {
        let Some(path) = &self.manual_path else { return Ok(()) };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut buffer = String::new();
        for record in records {
            buffer.push_str(&serde_json::to_string(record).expect("records serialize"));
            buffer.push('\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        file.write_all(buffer.as_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    fn apply(&mut self, record: EvaluationRecord) {
        self.manual.entry(record.key()).or_default().insert(record.scorer.clone(), record);
    }

    pub fn manual_records(&self, key: &TaskKey) -> impl Iterator<Item = &EvaluationRecord> {
        self.manual.get(key).into_iter().flat_map(|by_scorer| by_scorer.values())
    }

    pub fn manual_score(&self, key: &TaskKey) -> Option<f64> {
        let scores: Vec<f64> = self.manual_records(key).filter_map(|r| r.manual_score).collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    }

    /// Manual score when present, else the automatic one.
    pub fn effective_score(&self, key: &TaskKey) -> Option<f64> {
        self.manual_score(key).or_else(|| self.auto_score(key))
    }

    pub fn summary(&self, clause: ClauseKind, mode: Mode) -> ClauseSummary {
        let scores: Vec<(f64, bool)> = self
            .auto
            .keys()
            .filter(|k| k.clause == clause && k.mode == mode)
            .filter_map(|k| {
                let manual = self.manual_score(k);
                manual.or_else(|| self.auto_score(k)).map(|s| (s, manual.is_some()))
            })
            .collect();
        let mean = (!scores.is_empty()).then(|| round2(scores.iter().map(|s| s.0).sum::<f64>() / scores.len() as f64));
        ClauseSummary {
            docs_evaluated: scores.len(),
            manual_scored: scores.iter().filter(|s| s.1).count(),
            mean,
        }
    }

    /// Mean effective score over the evaluated documents, rounded half-up to 2 decimals.
    pub fn aggregate(&self, clause: ClauseKind, mode: Mode) -> Result<f64, StoreError> {
        self.summary(clause, mode).mean.ok_or(StoreError::NoRecords { clause, mode })
    }

    /// Every record the store holds: one automatic record per task plus manual ones.
    pub fn records(&self) -> Vec<EvaluationRecord> {
        let mut out = Vec::new();
        for (key, auto) in &self.auto {
            out.push(EvaluationRecord {
                doc_id: key.doc_id.clone(),
                clause: key.clause,
                mode: key.mode,
                auto_score: *auto,
                manual_score: None,
                scorer: AUTO_SCORER.into(),
                timestamp: 0,
            });
            out.extend(self.manual_records(key).cloned());
        }
        out
    }
}
