//! Settings resolution: config file, then command-line flags, then
//! environment variables. Later sources win.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cdmizer_core::retrieval::ProviderKind;
use cdmizer_core::run::{BackendKind, RunConfig};
use cdmizer_core::{ClauseKind, Mode};
use clap::Args;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PORT: u16 = 8750;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReviewSettings {
    pub host: String,
    pub port: u16,
    pub token: Option<String>,
    pub static_dir: Option<PathBuf>,
}

impl Default for ReviewSettings {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: DEFAULT_PORT, token: None, static_dir: None }
    }
}

/// Contents of a `--config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub review: ReviewSettings,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flags shared by every command that touches a run.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Run identifier (directory name under the output dir).
    #[arg(long)]
    pub run_id: Option<String>,
    /// Directory holding run directories.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Corpus directory; defaults to the generated fixture corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Schema file; defaults to the bundled CDM subset.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConvertFlags {
    #[arg(long = "clause", value_name = "CLAUSE")]
    pub clauses: Vec<ClauseKind>,
    #[arg(long = "mode", value_name = "MODE")]
    pub modes: Vec<Mode>,
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Number of retrieved examples.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_parser = parse_provider)]
    pub retrieval: Option<ProviderKind>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// Directory of canned responses for the mock backend.
    #[arg(long)]
    pub mock_dir: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Also convert clauses the document has no ground truth for.
    #[arg(long)]
    pub attempt_inapplicable: bool,
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "lexical" => Ok(ProviderKind::Lexical),
        "external" => Ok(ProviderKind::External),
        _ => Err(format!("unknown retrieval provider `{s}` (lexical, external)")),
    }
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "mock" => Ok(BackendKind::Mock),
        "http" => Ok(BackendKind::Http),
        _ => Err(format!("unknown backend `{s}` (mock, http)")),
    }
}

impl RunFlags {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = &self.run_id {
            config.run_id = v.clone();
        }
        if let Some(v) = &self.output_dir {
            config.output_dir = v.clone();
        }
        if let Some(v) = &self.corpus {
            config.corpus = Some(v.clone());
        }
        if let Some(v) = &self.schema {
            config.schema = Some(v.clone());
        }
    }
}

impl ConvertFlags {
    pub fn apply(&self, config: &mut RunConfig) {
        if !self.clauses.is_empty() {
            config.clauses = self.clauses.clone();
        }
        if !self.modes.is_empty() {
            config.modes = self.modes.clone();
        }
        let opt = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        opt(&mut config.targets, &self.targets);
        opt(&mut config.llm.prompt_file, &self.prompts);
        opt(&mut config.llm.mock_dir, &self.mock_dir);
        if let Some(v) = self.k {
            config.retrieval.k = v;
        }
        if let Some(v) = self.retrieval {
            config.retrieval.provider = v;
        }
        if let Some(v) = self.backend {
            config.llm.backend = v;
        }
        if let Some(v) = &self.endpoint {
            config.llm.endpoint = Some(v.clone());
        }
        if let Some(v) = &self.model {
            config.llm.model = Some(v.clone());
        }
        if let Some(v) = self.max_in_flight {
            config.llm.max_in_flight = v;
        }
        if let Some(v) = self.max_retries {
            config.llm.max_retries = v;
        }
        if self.attempt_inapplicable {
            config.attempt_inapplicable = true;
        }
    }
}

/// Environment overrides, applied last.
///
/// | variable | setting |
/// |---|---|
/// | `CDMIZER_RUN_ID` | `run_id` |
/// | `CDMIZER_OUTPUT_DIR` | `output_dir` |
/// | `CDMIZER_CORPUS` | `corpus` |
/// | `CDMIZER_SCHEMA` | `schema` |
/// | `CDMIZER_BACKEND` | `llm.backend` |
/// | `CDMIZER_LLM_ENDPOINT` | `llm.endpoint` |
/// | `CDMIZER_LLM_MODEL` | `llm.model` |
/// | `CDMIZER_LLM_API_KEY` | `llm.api_key` |
/// | `CDMIZER_MAX_IN_FLIGHT` | `llm.max_in_flight` |
/// | `CDMIZER_REVIEW_PORT` | `review.port` |
/// | `CDMIZER_REVIEW_TOKEN` | `review.token` |
pub fn apply_env(config: &mut FileConfig, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
    let run = &mut config.run;
    if let Some(v) = lookup("CDMIZER_RUN_ID") {
        run.run_id = v;
    }
    if let Some(v) = lookup("CDMIZER_OUTPUT_DIR") {
        run.output_dir = v.into();
    }
    if let Some(v) = lookup("CDMIZER_CORPUS") {
        run.corpus = Some(v.into());
    }
    if let Some(v) = lookup("CDMIZER_SCHEMA") {
        run.schema = Some(v.into());
    }
    if let Some(v) = lookup("CDMIZER_BACKEND") {
        run.llm.backend = parse_backend(&v).map_err(anyhow::Error::msg)?;
    }
    if let Some(v) = lookup("CDMIZER_LLM_ENDPOINT") {
        run.llm.endpoint = Some(v);
    }
    if let Some(v) = lookup("CDMIZER_LLM_MODEL") {
        run.llm.model = Some(v);
    }
    if let Some(v) = lookup("CDMIZER_LLM_API_KEY") {
        run.llm.api_key = Some(v);
    }
    if let Some(v) = lookup("CDMIZER_MAX_IN_FLIGHT") {
        run.llm.max_in_flight = v.parse().context("CDMIZER_MAX_IN_FLIGHT")?;
    }
    if let Some(v) = lookup("CDMIZER_REVIEW_PORT") {
        config.review.port = v.parse().context("CDMIZER_REVIEW_PORT")?;
    }
    if let Some(v) = lookup("CDMIZER_REVIEW_TOKEN") {
        config.review.token = Some(v);
    }
    Ok(())
}
