//! Manual review tasks over a completed run.
//!
//! A task exists for every persisted output whose document has ground truth
//! for the clause. Reads never mutate; submissions go through the run's
//! [`ScoreStore`] and are durable before they are acknowledged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clause::{ClauseKind, Mode};
use crate::corpus::{clause_excerpt, Corpus};
use crate::evaluator::{
    emit_report, score_breakdown, BenchmarkReport, EvaluationRecord, ReferenceScoreTables, ScoreBreakdown, ScoreStore,
    StoreError, TaskKey,
};
use crate::llm::GeneratedOutput;
use crate::run::{provenance, RunConfig, RunDir, RunError};
use crate::schema::SchemaGraph;

pub const DEFAULT_PAGE_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Scored,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFilter {
    #[serde(default)]
    pub status: Option<TaskStatus>,
    #[serde(default)]
    pub clause: Option<ClauseKind>,
    #[serde(default)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub doc_id: String,
    pub clause: ClauseKind,
    pub mode: Mode,
    pub auto_score: f64,
    pub manual_score: Option<f64>,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPage {
    pub tasks: Vec<TaskSummary>,
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTask {
    #[serde(flatten)]
    pub summary: TaskSummary,
    pub contract_excerpt: String,
    /// Parsed model output, or null when the output was not valid JSON.
    pub generated: Value,
    pub raw_output: String,
    pub truth: Value,
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreAck {
    pub task_id: String,
    pub status: TaskStatus,
    pub manual_score: f64,
    pub clause: ClauseKind,
    pub mode: Mode,
    /// Mean over the clause and mode after this submission.
    pub running_mean: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error(transparent)]
    BadTaskId(#[from] crate::evaluator::BadTaskId),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Run(#[from] RunError),
}

struct TaskEntry {
    output: GeneratedOutput,
    truth: Value,
    auto: f64,
}

pub struct ReviewSession {
    run: RunDir,
    config: RunConfig,
    corpus: Corpus,
    graph: SchemaGraph,
    tables: ReferenceScoreTables,
    store: ScoreStore,
    tasks: BTreeMap<TaskKey, TaskEntry>,
}

impl ReviewSession {
    pub fn open(run: RunDir, corpus: Corpus, graph: SchemaGraph) -> Result<Self, ReviewError> {
        let config = run.read_config()?;
        let mut store = ScoreStore::open(run.manual_scores_path())?;
        let mut tasks = BTreeMap::new();
        for output in run.outputs()? {
            let Some(truth) = corpus.doc(&output.doc_id).and_then(|d| d.truth(output.clause)).cloned() else {
                continue;
            };
            let key = TaskKey::new(&output.doc_id, output.clause, output.mode);
            let auto = output.parsed.as_ref().map_or(0.0, |v| score_breakdown(v, &truth, &graph).score);
            store.insert_auto(key.clone(), auto)?;
            tasks.insert(key, TaskEntry { output, truth, auto });
        }
        Ok(Self { run, config, corpus, graph, tables: ReferenceScoreTables::builtin(), store, tasks })
    }

    /// Opens the run with the schema and corpus named in its config.
    pub fn open_run(run: RunDir) -> Result<Self, ReviewError> {
        let config = run.read_config()?;
        let graph = crate::run::load_schema(config.schema.as_deref())?;
        let corpus = crate::run::load_corpus_or_fixture(config.corpus.as_deref())?;
        Self::open(run, corpus, graph)
    }

    pub fn run_id(&self) -> &str {
        self.run.run_id()
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    fn summary(&self, key: &TaskKey, entry: &TaskEntry) -> TaskSummary {
        let manual = self.store.manual_score(key);
        TaskSummary {
            task_id: key.to_string(),
            doc_id: key.doc_id.clone(),
            clause: key.clause,
            mode: key.mode,
            auto_score: entry.auto,
            manual_score: manual,
            status: if manual.is_some() { TaskStatus::Scored } else { TaskStatus::Pending },
        }
    }

    /// Tasks ordered by document, clause and mode. `page` is 0-based.
    pub fn list_tasks(&self, filter: &TaskFilter, page: usize, page_size: usize) -> TaskPage {
        let page_size = if page_size == 0 { DEFAULT_PAGE_SIZE } else { page_size };
        let matching: Vec<TaskSummary> = self
            .tasks
            .iter()
            .filter(|(k, _)| filter.clause.is_none_or(|c| c == k.clause) && filter.mode.is_none_or(|m| m == k.mode))
            .map(|(k, e)| self.summary(k, e))
            .filter(|s| filter.status.is_none_or(|st| st == s.status))
            .collect();
        let total = matching.len();
        let tasks = matching.into_iter().skip(page.saturating_mul(page_size)).take(page_size).collect();
        TaskPage { tasks, total, page, page_size }
    }

    fn entry(&self, task_id: &str) -> Result<(TaskKey, &TaskEntry), ReviewError> {
        let key: TaskKey = task_id.parse()?;
        let entry = self.tasks.get(&key).ok_or_else(|| ReviewError::UnknownTask(task_id.to_string()))?;
        Ok((key, entry))
    }

    pub fn get_task(&self, task_id: &str) -> Result<ReviewTask, ReviewError> {
        let (key, entry) = self.entry(task_id)?;
        let text = self.corpus.doc(&key.doc_id).map(|d| d.text.as_str()).unwrap_or_default();
        let generated = entry.output.parsed.clone().unwrap_or(Value::Null);
        let breakdown = score_breakdown(&generated, &entry.truth, &self.graph);
        Ok(ReviewTask {
            summary: self.summary(&key, entry),
            contract_excerpt: clause_excerpt(text, key.clause),
            generated,
            raw_output: entry.output.raw.clone(),
            truth: entry.truth.clone(),
            breakdown,
        })
    }

    pub fn submit_score(&mut self, task_id: &str, score: f64, scorer: &str) -> Result<ScoreAck, ReviewError> {
        let (key, _) = self.entry(task_id)?;
        self.store.ingest_manual(vec![EvaluationRecord::manual(&key, score, scorer)])?;
        let running_mean = self.store.aggregate(key.clause, key.mode)?;
        Ok(ScoreAck {
            task_id: key.to_string(),
            status: TaskStatus::Scored,
            manual_score: self.store.manual_score(&key).unwrap_or(score),
            clause: key.clause,
            mode: key.mode,
            running_mean,
        })
    }

    pub fn report(&self) -> Result<BenchmarkReport, ReviewError> {
        let provenance = provenance(&self.run, &self.config, &self.corpus)?;
        Ok(emit_report(&self.store, &self.tables, provenance))
    }
}
