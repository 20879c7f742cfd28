//! Run directories and the batch conversion driver.
//!
//! Layout of `<output_dir>/<run_id>/`:
//!
//! ```text
//! config.json               resolved configuration (no secrets)
//! outputs/<task>.json       one GeneratedOutput per task id
//! manual_scores.jsonl       manual evaluation records
//! report.json, report.md    written by evaluation
//! ```
//!
//! Every file is written atomically, so an interrupted run leaves either a
//! complete output or none, and re-running skips what is already there.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clause::{ClauseKind, Mode};
use crate::corpus::{generate_corpus, load_corpus, Corpus, CorpusError, GeneratorOptions};
use crate::evaluator::{score_breakdown, Provenance, ScoreStore, StoreError, TaskKey};
use crate::fixtures;
use crate::llm::{
    convert_clause, BackendError, CompletionBackend, ConversionContext, ConvertSettings, GeneratedOutput, HttpBackend,
    HttpBackendConfig, MockBackend, PromptFileError, PromptSet, DEFAULT_MAX_IN_FLIGHT, DEFAULT_MAX_RETRIES,
    DEFAULT_TRANSPORT_RETRIES,
};
use crate::retrieval::{build_external_index, build_index, ProviderKind, RetrievalError, RetrievalIndex, DEFAULT_K};
use crate::schema::{parse_schema, SchemaError, SchemaGraph};
use crate::template::{generate_all, TargetRegistry, Template, TemplateError};

pub const CONFIG_FILE: &str = "config.json";
pub const OUTPUTS_DIR: &str = "outputs";
pub const MANUAL_SCORES_FILE: &str = "manual_scores.jsonl";

/// Writes `bytes` to a temporary sibling, syncs it, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Offline backend: canned files from `mock_dir`, or ground truth when unset.
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSettings {
    pub provider: ProviderKind,
    pub k: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self { provider: ProviderKind::Lexical, k: DEFAULT_K, endpoint: None, model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub backend: BackendKind,
    pub mock_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Never written to the run directory.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    #[serde(rename = "timeout_s")]
    pub timeout_secs: u64,
    pub transport_retries: u32,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub prompt_file: Option<PathBuf>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            mock_dir: None,
            endpoint: None,
            model: None,
            api_key: None,
            timeout_secs: crate::llm::DEFAULT_TIMEOUT.as_secs(),
            transport_retries: DEFAULT_TRANSPORT_RETRIES,
            max_retries: DEFAULT_MAX_RETRIES,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            prompt_file: None,
        }
    }
}

/// Everything needed to reproduce a run. Unset paths fall back to the
/// bundled schema, targets and prompts, and to the generated fixture corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run_id: String,
    pub output_dir: PathBuf,
    pub schema: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub clauses: Vec<ClauseKind>,
    pub modes: Vec<Mode>,
    pub attempt_inapplicable: bool,
    pub retrieval: RetrievalSettings,
    pub llm: LlmSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: "default".into(),
            output_dir: PathBuf::from("runs"),
            schema: None,
            targets: None,
            corpus: None,
            clauses: ClauseKind::ALL.to_vec(),
            modes: Mode::ALL.to_vec(),
            attempt_inapplicable: false,
            retrieval: RetrievalSettings::default(),
            llm: LlmSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize") + "\n"
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn settings(&self) -> ConvertSettings {
        ConvertSettings {
            k: self.retrieval.k,
            max_retries: self.llm.max_retries,
            attempt_inapplicable: self.attempt_inapplicable,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("run `{0}` not found")]
    MissingRun(String),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: io::Error },
    #[error("invalid JSON in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Prompt(#[from] PromptFileError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn read_text(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Read { path: path.display().to_string(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, RunError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| RunError::Json { path: path.display().to_string(), source })
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
    run_id: String,
}

impl RunDir {
    pub fn create(output_dir: &Path, run_id: &str) -> io::Result<Self> {
        let root = output_dir.join(run_id);
        fs::create_dir_all(root.join(OUTPUTS_DIR))?;
        Ok(Self { root, run_id: run_id.into() })
    }

    pub fn open(output_dir: &Path, run_id: &str) -> Result<Self, RunError> {
        let root = output_dir.join(run_id);
        if !root.join(CONFIG_FILE).is_file() {
            return Err(RunError::MissingRun(run_id.into()));
        }
        Ok(Self { root, run_id: run_id.into() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn output_path(&self, key: &TaskKey) -> PathBuf {
        self.root.join(OUTPUTS_DIR).join(format!("{key}.json"))
    }

    pub fn manual_scores_path(&self) -> PathBuf {
        self.root.join(MANUAL_SCORES_FILE)
    }

    pub fn write_config(&self, config: &RunConfig) -> io::Result<()> {
        write_atomic(&self.root.join(CONFIG_FILE), config.to_json().as_bytes())
    }

    pub fn read_config(&self) -> Result<RunConfig, RunError> {
        read_json(&self.root.join(CONFIG_FILE))
    }

    pub fn has_output(&self, key: &TaskKey) -> bool {
        self.output_path(key).is_file()
    }

    pub fn write_output(&self, output: &GeneratedOutput) -> io::Result<()> {
        let key = TaskKey::new(&output.doc_id, output.clause, output.mode);
        let text = serde_json::to_string_pretty(output).expect("outputs serialize") + "\n";
        write_atomic(&self.output_path(&key), text.as_bytes())
    }

    pub fn read_output(&self, key: &TaskKey) -> Result<GeneratedOutput, RunError> {
        read_json(&self.output_path(key))
    }

    /// Task ids of all persisted outputs, sorted.
    pub fn output_keys(&self) -> Result<Vec<TaskKey>, RunError> {
        let mut keys = Vec::new();
        for entry in fs::read_dir(self.root.join(OUTPUTS_DIR))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(key) = name.strip_suffix(".json").and_then(|stem| stem.parse().ok()) {
                keys.push(key);
            }
        }
        keys.sort();
        Ok(keys)
    }

    pub fn outputs(&self) -> Result<Vec<GeneratedOutput>, RunError> {
        self.output_keys()?.iter().map(|k| self.read_output(k)).collect()
    }
}

/// Loaded inputs for a run: schema, templates, corpus, prompts, index, backend.
pub struct Pipeline {
    pub graph: SchemaGraph,
    pub templates: BTreeMap<ClauseKind, Template>,
    pub corpus: Corpus,
    pub prompts: PromptSet,
    /// Built only when some requested mode uses retrieval.
    pub index: Option<RetrievalIndex>,
    pub backend: Arc<dyn CompletionBackend>,
}

pub fn load_schema(path: Option<&Path>) -> Result<SchemaGraph, RunError> {
    match path {
        Some(path) => Ok(parse_schema(&read_text(path)?)?),
        None => Ok(fixtures::cdm_schema()),
    }
}

pub fn load_registry(path: Option<&Path>) -> Result<TargetRegistry, RunError> {
    match path {
        Some(path) => Ok(TargetRegistry::builtin().with_overrides(TargetRegistry::from_json(&read_text(path)?)?)),
        None => Ok(TargetRegistry::builtin()),
    }
}

pub fn load_corpus_or_fixture(path: Option<&Path>) -> Result<Corpus, RunError> {
    match path {
        Some(path) => Ok(load_corpus(path)?),
        None => Ok(generate_corpus(GeneratorOptions::default())),
    }
}

impl Pipeline {
    pub fn load(config: &RunConfig) -> Result<Self, RunError> {
        let graph = load_schema(config.schema.as_deref())?;
        let templates = generate_all(&graph, &load_registry(config.targets.as_deref())?)?;
        let corpus = load_corpus_or_fixture(config.corpus.as_deref())?;
        let prompts = match &config.llm.prompt_file {
            Some(path) => PromptSet::load(path)?,
            None => PromptSet::builtin(),
        };
        let index = if config.modes.contains(&Mode::WithRag) { Some(build_retriever(config, &corpus)?) } else { None };
        let backend = build_backend(&config.llm, &corpus)?;
        Ok(Self { graph, templates, corpus, prompts, index, backend })
    }

    pub fn with_backend(mut self, backend: Arc<dyn CompletionBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn context(&self, settings: ConvertSettings) -> ConversionContext<'_> {
        ConversionContext {
            graph: &self.graph,
            templates: &self.templates,
            retriever: self.index.as_ref().map(|i| i as _),
            backend: self.backend.as_ref(),
            prompts: &self.prompts,
            settings,
        }
    }
}

fn build_retriever(config: &RunConfig, corpus: &Corpus) -> Result<RetrievalIndex, RunError> {
    match config.retrieval.provider {
        ProviderKind::Lexical => Ok(build_index(corpus)?),
        ProviderKind::External => {
            let endpoint = config
                .retrieval
                .endpoint
                .as_deref()
                .ok_or_else(|| RunError::Config("retrieval.endpoint is required for the external provider".into()))?;
            let timeout = Duration::from_secs(config.llm.timeout_secs);
            Ok(build_external_index(corpus, endpoint, config.retrieval.model.as_deref(), timeout)?)
        }
    }
}

fn build_backend(llm: &LlmSettings, corpus: &Corpus) -> Result<Arc<dyn CompletionBackend>, RunError> {
    Ok(match llm.backend {
        BackendKind::Mock => match &llm.mock_dir {
            Some(dir) => Arc::new(MockBackend::from_dir(dir.clone())),
            None => Arc::new(MockBackend::ground_truth(corpus)),
        },
        BackendKind::Http => {
            let endpoint =
                llm.endpoint.clone().ok_or_else(|| RunError::Config("llm.endpoint is required".into()))?;
            let model = llm.model.clone().ok_or_else(|| RunError::Config("llm.model is required".into()))?;
            let mut http = HttpBackendConfig::new(endpoint, model);
            http.api_key = llm.api_key.clone();
            http.timeout = Duration::from_secs(llm.timeout_secs);
            http.transport_retries = llm.transport_retries;
            Arc::new(HttpBackend::new(http)?)
        }
    })
}

/// Tasks in deterministic order: document, then clause, then mode.
pub fn plan_tasks(corpus: &Corpus, clauses: &[ClauseKind], modes: &[Mode], attempt_inapplicable: bool) -> Vec<TaskKey> {
    let mut tasks = Vec::new();
    for doc in corpus.docs() {
        for &clause in clauses {
            if !attempt_inapplicable && !doc.applies(clause) {
                continue;
            }
            for &mode in modes {
                tasks.push(TaskKey::new(&doc.id, clause, mode));
            }
        }
    }
    tasks.sort();
    tasks.dedup();
    tasks
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub planned: usize,
    /// Already persisted by an earlier invocation.
    pub skipped: usize,
    pub converted: usize,
    pub conformance_failures: usize,
    /// Hard failures (backend, retrieval, IO) by task id.
    pub errors: Vec<(String, String)>,
}

impl RunSummary {
    pub fn is_success(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Converts every task without a persisted output, at most `max_in_flight`
/// at a time. Each output is persisted as soon as it is produced.
pub fn run_conversions(
    run: &RunDir,
    pipeline: &Pipeline,
    settings: ConvertSettings,
    tasks: &[TaskKey],
    max_in_flight: usize,
) -> Result<RunSummary, RunError> {
    let pending: Vec<&TaskKey> = tasks.iter().filter(|k| !run.has_output(k)).collect();
    let mut summary = RunSummary { planned: tasks.len(), skipped: tasks.len() - pending.len(), ..RunSummary::default() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let ctx = pipeline.context(settings);
    let results: Vec<(String, Result<bool, String>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|key| {
                let outcome = (|| {
                    let doc = pipeline
                        .corpus
                        .doc(&key.doc_id)
                        .ok_or_else(|| format!("document `{}` not in corpus", key.doc_id))?;
                    let output = convert_clause(doc, key.clause, key.mode, &ctx).map_err(|e| e.to_string())?;
                    run.write_output(&output).map_err(|e| e.to_string())?;
                    Ok(output.conformance.passed())
                })();
                if let Err(e) = &outcome {
                    tracing::warn!(task = %key, error = %e, "conversion failed");
                }
                (key.to_string(), outcome)
            })
            .collect()
    });
    for (task, outcome) in results {
        match outcome {
            Ok(passed) => {
                summary.converted += 1;
                if !passed {
                    summary.conformance_failures += 1;
                }
            }
            Err(e) => summary.errors.push((task, e)),
        }
    }
    Ok(summary)
}

/// Creates (or resumes) the run described by `config` and converts all pending tasks.
pub fn execute(config: &RunConfig, pipeline: &Pipeline) -> Result<(RunDir, RunSummary), RunError> {
    let run = RunDir::create(&config.output_dir, &config.run_id)?;
    run.write_config(config)?;
    let tasks = plan_tasks(&pipeline.corpus, &config.clauses, &config.modes, config.attempt_inapplicable);
    let summary = run_conversions(&run, pipeline, config.settings(), &tasks, config.llm.max_in_flight)?;
    Ok((run, summary))
}

/// Auto-scores every persisted output against the corpus ground truth and
/// merges the run's manual scores.
///
/// Outputs without parseable JSON score 0. Tasks whose document has no
/// ground truth for the clause are skipped.
pub fn evaluate_run(run: &RunDir, corpus: &Corpus, graph: &SchemaGraph) -> Result<ScoreStore, RunError> {
    let mut store = ScoreStore::open(run.manual_scores_path())?;
    for output in run.outputs()? {
        let Some(doc) = corpus.doc(&output.doc_id) else { continue };
        let Some(truth) = doc.truth(output.clause) else { continue };
        let score = match &output.parsed {
            Some(value) => score_breakdown(value, truth, graph).score,
            None => 0.0,
        };
        store.insert_auto(TaskKey::new(&output.doc_id, output.clause, output.mode), score)?;
    }
    Ok(store)
}

pub fn provenance(run: &RunDir, config: &RunConfig, corpus: &Corpus) -> Result<Provenance, RunError> {
    let backend = run.outputs()?.first().map(|o| o.backend.clone());
    Ok(Provenance {
        run_id: Some(run.run_id().to_string()),
        backend,
        config_digest: Some(config.digest()),
        applicable_docs: ClauseKind::ALL.iter().map(|&c| (c, corpus.applicable_count(c))).collect(),
    })
}
