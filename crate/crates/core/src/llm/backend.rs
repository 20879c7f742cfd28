//! Chat-completion backends.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::Corpus;

use super::prompt::{PromptBundle, PromptMetadata};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_TRANSPORT_RETRIES: u32 = 3;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub messages: &'a [ChatMessage],
    pub metadata: &'a PromptMetadata,
    /// 1-based conversion attempt (validation retries, not transport retries).
    pub attempt: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), ..Self::default() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempts: {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Response(String),
    #[error("mock backend has no response for {0}")]
    MockMissing(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait CompletionBackend: Send + Sync {
    /// Identifier recorded with every output.
    fn id(&self) -> String;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;
}

/// Sends the initial prompt of `bundle` to `backend`.
pub fn complete(bundle: &PromptBundle, backend: &dyn CompletionBackend) -> Result<Completion, BackendError> {
    let messages = bundle.messages();
    backend.complete(&CompletionRequest { messages: &messages, metadata: &bundle.metadata, attempt: 1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpBackendConfig {
    /// Base URL (`http://host/v1`) or the full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub transport_retries: u32,
    pub backoff_base: Duration,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            transport_retries: DEFAULT_TRANSPORT_RETRIES,
            backoff_base: Duration::from_millis(500),
        }
    }

    pub fn chat_url(&self) -> String {
        let trimmed = self.endpoint.trim_end_matches('/');
        if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        }
    }
}

/// OpenAI-compatible chat-completions client. Temperature is pinned to 0.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn send_once(&self, body: &Value) -> Result<reqwest::blocking::Response, reqwest::Error> {
        let mut request = self.client.post(self.config.chat_url()).json(body);
        if let Some(key) = &self.config.api_key {
            request = request.bearer_auth(key);
        }
        request.send()
    }
}

fn retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": 0,
            "seed": 0,
        });
        let started = Instant::now();
        let max_attempts = self.config.transport_retries + 1;
        let mut attempt = 0;
        let response = loop {
            attempt += 1;
            let outcome = self.send_once(&body);
            let retry_detail = match &outcome {
                Ok(resp) if retryable_status(resp.status().as_u16()) => Some(format!("HTTP {}", resp.status())),
                Ok(_) => None,
                Err(e) => Some(e.to_string()),
            };
            match retry_detail {
                None => break outcome.expect("checked above"),
                Some(detail) if attempt >= max_attempts => {
                    return match outcome {
                        Ok(resp) => Err(BackendError::Status {
                            status: resp.status().as_u16(),
                            body: resp.text().unwrap_or_default(),
                        }),
                        Err(_) => Err(BackendError::Transport { attempts: attempt, detail }),
                    };
                }
                Some(detail) => {
                    let delay = self.config.backoff_base * 2u32.saturating_pow(attempt - 1);
                    tracing::warn!(attempt, ?delay, %detail, "retrying chat completion");
                    thread::sleep(delay);
                }
            }
        };

        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Status { status: status.as_u16(), body: response.text().unwrap_or_default() });
        }
        let payload: Value = response.json().map_err(|e| BackendError::Response(e.to_string()))?;
        let text = payload["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Response("missing choices[0].message.content".into()))?
            .to_string();
        Ok(Completion {
            text,
            latency_ms: Some(started.elapsed().as_millis() as u64),
            prompt_tokens: payload["usage"]["prompt_tokens"].as_u64(),
            completion_tokens: payload["usage"]["completion_tokens"].as_u64(),
        })
    }
}

type Responder = dyn Fn(&CompletionRequest<'_>) -> Result<String, BackendError> + Send + Sync;

/// Deterministic offline backend.
pub struct MockBackend {
    id: String,
    responder: Box<Responder>,
}

fn mock_key(meta: &PromptMetadata) -> String {
    format!("{}.{}.{}", meta.doc_id, meta.clause.slug(), meta.mode.slug())
}

impl MockBackend {
    pub fn new(
        id: impl Into<String>,
        responder: impl Fn(&CompletionRequest<'_>) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self { id: id.into(), responder: Box::new(responder) }
    }

    /// Canned responses from a directory. For attempt `n` of a conversion the
    /// first existing file wins: `<doc>.<clause>.<mode>.<n>.txt`,
    /// `<doc>.<clause>.<mode>.txt`, `<doc>.<clause>.txt`.
    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        let dir: PathBuf = dir.into();
        let id = format!("mock:{}", dir.display());
        Self::new(id, move |request| {
            let meta = request.metadata;
            let key = mock_key(meta);
            let candidates = [
                format!("{key}.{}.txt", request.attempt),
                format!("{key}.txt"),
                format!("{}.{}.txt", meta.doc_id, meta.clause.slug()),
            ];
            candidates
                .iter()
                .map(|name| dir.join(name))
                .find(|path| path.is_file())
                .ok_or_else(|| BackendError::MockMissing(key.clone()))
                .and_then(|path| fs::read_to_string(&path).map_err(|e| BackendError::Config(e.to_string())))
        })
    }

    /// Answers every request with the document's ground truth for the clause.
    pub fn ground_truth(corpus: &Corpus) -> Self {
        let mut answers = HashMap::new();
        for doc in corpus.docs() {
            for (clause, truth) in &doc.ground_truth {
                answers.insert((doc.id.clone(), *clause), fenced(truth));
            }
        }
        Self::new("mock:ground-truth", move |request| {
            let meta = request.metadata;
            answers
                .get(&(meta.doc_id.clone(), meta.clause))
                .cloned()
                .ok_or_else(|| BackendError::MockMissing(mock_key(meta)))
        })
    }

    /// Returns `responses[attempt - 1]`, repeating the last one.
    pub fn scripted(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "scripted mock needs at least one response");
        Self::new("mock:scripted", move |request| {
            let i = (request.attempt as usize).saturating_sub(1).min(responses.len() - 1);
            Ok(responses[i].clone())
        })
    }
}

impl CompletionBackend for MockBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        (self.responder)(request).map(Completion::text)
    }
}

fn fenced(value: &Value) -> String {
    format!("```json\n{}\n```\n", serde_json::to_string_pretty(value).expect("JSON values serialize"))
}

/// Writes `<doc>.<clause>.txt` ground-truth answers for [`MockBackend::from_dir`].
pub fn write_truth_responses(corpus: &Corpus, dir: &Path) -> std::io::Result<usize> {
    fs::create_dir_all(dir)?;
    let mut written = 0;
    for doc in corpus.docs() {
        for (clause, truth) in &doc.ground_truth {
            fs::write(dir.join(format!("{}.{}.txt", doc.id, clause.slug())), fenced(truth))?;
            written += 1;
        }
    }
    Ok(written)
}

/// Caps the number of concurrent requests reaching the wrapped backend.
pub struct InFlightLimit {
    inner: Arc<dyn CompletionBackend>,
    max: usize,
    state: Mutex<(usize, usize)>,
    freed: Condvar,
}

impl InFlightLimit {
    pub fn new(inner: Arc<dyn CompletionBackend>, max: usize) -> Self {
        Self { inner, max: max.max(1), state: Mutex::new((0, 0)), freed: Condvar::new() }
    }

    /// Highest number of simultaneous requests observed so far.
    pub fn peak(&self) -> usize {
        self.state.lock().unwrap().1
    }
}

impl CompletionBackend for InFlightLimit {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        {
            let mut state = self.freed.wait_while(self.state.lock().unwrap(), |s| s.0 >= self.max).unwrap();
            state.0 += 1;
            state.1 = state.1.max(state.0);
        }
        let result = self.inner.complete(request);
        self.state.lock().unwrap().0 -= 1;
        self.freed.notify_one();
        result
    }
}
