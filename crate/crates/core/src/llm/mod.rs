//! Template population through a chat-completion backend.
//!
//! One conversion runs retrieve (with RAG only) → prompt → complete →
//! extract → conformance. Extraction or conformance failures are fed back
//! to the model up to `max_retries` times; exhausting the retries yields an
//! output with failed conformance rather than an error.

mod backend;
mod extract;
mod prompt;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clause::{ClauseKind, Mode};
use crate::conformance::{check_conformance, ConformanceReport};
use crate::corpus::ContractDoc;
use crate::retrieval::{ExampleRetriever, RetrievalError, DEFAULT_K};
use crate::schema::SchemaGraph;
use crate::template::Template;

pub use backend::{
    complete, write_truth_responses, BackendError, ChatMessage, Completion, CompletionBackend, CompletionRequest,
    HttpBackend, HttpBackendConfig, InFlightLimit, MockBackend, DEFAULT_MAX_IN_FLIGHT, DEFAULT_TIMEOUT,
    DEFAULT_TRANSPORT_RETRIES,
};
pub use extract::{extract_json, ExtractError};
pub use prompt::{
    assemble_prompt, schema_excerpt, PromptBundle, PromptFileError, PromptMetadata, PromptSection, PromptSet,
    SectionKind,
};

pub const DEFAULT_MAX_RETRIES: u32 = 2;
const MAX_FEEDBACK_LINES: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl Usage {
    fn add(&mut self, completion: &Completion) {
        fn sum(a: Option<u64>, b: Option<u64>) -> Option<u64> {
            match (a, b) {
                (None, None) => None,
                (a, b) => Some(a.unwrap_or(0) + b.unwrap_or(0)),
            }
        }
        self.latency_ms = sum(self.latency_ms, completion.latency_ms);
        self.prompt_tokens = sum(self.prompt_tokens, completion.prompt_tokens);
        self.completion_tokens = sum(self.completion_tokens, completion.completion_tokens);
    }
}

/// Result of converting one (document, clause, mode) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedOutput {
    pub doc_id: String,
    pub clause: ClauseKind,
    pub mode: Mode,
    pub raw: String,
    pub parsed: Option<Value>,
    pub conformance: ConformanceReport,
    pub attempts: u32,
    pub backend: String,
    /// Ids of the retrieved example documents, in prompt order.
    #[serde(default)]
    pub examples: Vec<String>,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvertSettings {
    pub k: usize,
    pub max_retries: u32,
    pub attempt_inapplicable: bool,
}

impl Default for ConvertSettings {
    fn default() -> Self {
        Self { k: DEFAULT_K, max_retries: DEFAULT_MAX_RETRIES, attempt_inapplicable: false }
    }
}

/// Everything a conversion needs besides the document itself.
pub struct ConversionContext<'a> {
    pub graph: &'a SchemaGraph,
    pub templates: &'a BTreeMap<ClauseKind, Template>,
    /// Required for [`Mode::WithRag`]; never consulted otherwise.
    pub retriever: Option<&'a dyn ExampleRetriever>,
    pub backend: &'a dyn CompletionBackend,
    pub prompts: &'a PromptSet,
    pub settings: ConvertSettings,
}

#[derive(Debug, thiserror::Error)]
pub enum ConvertError {
    #[error("clause `{clause}` does not apply to `{doc}`")]
    NotApplicable { doc: String, clause: ClauseKind },
    #[error("no template for clause `{0}`")]
    MissingTemplate(ClauseKind),
    #[error("with-RAG conversion requested without a retriever")]
    NoRetriever,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub fn convert_clause(
    doc: &ContractDoc,
    clause: ClauseKind,
    mode: Mode,
    ctx: &ConversionContext<'_>,
) -> Result<GeneratedOutput, ConvertError> {
    if !doc.applies(clause) && !ctx.settings.attempt_inapplicable {
        return Err(ConvertError::NotApplicable { doc: doc.id.clone(), clause });
    }
    let template = ctx.templates.get(&clause).ok_or(ConvertError::MissingTemplate(clause))?;
    let examples = match mode {
        Mode::WithRag => {
            let retriever = ctx.retriever.ok_or(ConvertError::NoRetriever)?;
            retriever.retrieve(&doc.id, clause, ctx.settings.k)?
        }
        Mode::WithoutRag => Vec::new(),
    };
    let bundle = assemble_prompt(template, ctx.graph, doc, &examples, mode, ctx.prompts);

    let mut messages = bundle.messages();
    let mut usage = Usage::default();
    let mut attempt = 0;
    loop {
        attempt += 1;
        let completion =
            ctx.backend.complete(&CompletionRequest { messages: &messages, metadata: &bundle.metadata, attempt })?;
        usage.add(&completion);
        let raw = completion.text;
        let (parsed, conformance) = match extract_json(&raw) {
            Ok(value) => {
                let report = check_conformance(&value, ctx.graph, template);
                (Some(value), report)
            }
            Err(e) => (None, ConformanceReport::unparsed(e.to_string())),
        };

        if conformance.passed() || attempt > ctx.settings.max_retries {
            tracing::debug!(doc = %doc.id, %clause, %mode, attempt, passed = conformance.passed(), "conversion finished");
            return Ok(GeneratedOutput {
                doc_id: doc.id.clone(),
                clause,
                mode,
                raw,
                parsed,
                conformance,
                attempts: attempt,
                backend: ctx.backend.id(),
                examples: examples.iter().map(|e| e.doc_id.clone()).collect(),
                usage,
            });
        }

        let diagnostics: Vec<String> =
            conformance.violations.iter().take(MAX_FEEDBACK_LINES).map(|v| format!("- {v}")).collect();
        messages.push(ChatMessage::assistant(raw));
        messages.push(ChatMessage::user(ctx.prompts.feedback(&diagnostics.join("\n"))));
    }
}
