//! Chat-style completion client: ordered (role, content) messages in, text
//! out. The HTTP implementation targets OpenAI-compatible endpoints; a
//! fixture client replays canned responses so every LLM-dependent path is
//! testable offline.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 200;
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("completion service error after {attempts} attempt(s): {message}")]
    Service { attempts: u32, message: String },
    #[error("completion response malformed: {0}")]
    Malformed(String),
    #[error("fixture client exhausted its canned responses")]
    FixtureExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

pub trait CompletionClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError>;
}

/// Connection settings for an OpenAI-compatible chat endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_in_flight: usize,
    pub retries: u32,
    /// Base backoff in milliseconds, doubled per retry.
    pub backoff_ms: u64,
    #[serde(skip_serializing, default)]
    pub api_key: Option<String>,
}

impl ClientConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            retries: DEFAULT_RETRIES,
            backoff_ms: 250,
            api_key: None,
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Blocking HTTP client with exponential-backoff retry.
pub struct HttpCompletionClient {
    config: ClientConfig,
    agent: ureq::Agent,
}

impl HttpCompletionClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self { config, agent }
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, messages: &[ChatMessage]) -> Result<String, String> {
        let request = ChatRequest {
            model: &self.config.model,
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_output_tokens,
        };
        let mut builder = self.agent.post(self.endpoint()).header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let mut response = builder.send_json(&request).map_err(|e| e.to_string())?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| format!("bad response body: {e}"))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| "response had no choices".to_string())
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        let mut last_error = String::new();
        let attempts = self.config.retries.max(1);
        for attempt in 0..attempts {
            match self.attempt(messages) {
                Ok(text) => return Ok(text),
                Err(e) => last_error = e,
            }
            if attempt + 1 < attempts && self.config.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
            }
        }
        Err(ClientError::Service { attempts, message: last_error })
    }
}

/// Replays canned responses in order; used by tests and offline runs.
pub struct FixtureClient {
    responses: Mutex<VecDeque<String>>,
}

impl FixtureClient {
    pub fn new(responses: Vec<String>) -> Self {
        Self { responses: Mutex::new(responses.into()) }
    }
}

impl CompletionClient for FixtureClient {
    fn complete(&self, _messages: &[ChatMessage]) -> Result<String, ClientError> {
        self.responses
            .lock()
            .expect("fixture lock")
            .pop_front()
            .ok_or(ClientError::FixtureExhausted)
    }
}

/// Adapter for closures, handy in tests that need to inspect the prompt.
pub struct FnClient<F>(pub F);

impl<F> CompletionClient for FnClient<F>
where
    F: Fn(&[ChatMessage]) -> Result<String, ClientError> + Send + Sync,
{
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ClientError> {
        (self.0)(messages)
    }
}

/// Apply `f` to every item with at most `max_in_flight` invocations running
/// at once. Results come back in input order.
pub fn run_bounded<T, R, F>(items: Vec<T>, max_in_flight: usize, f: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    let max_in_flight = max_in_flight.max(1).min(items.len().max(1));
    if items.len() <= 1 || max_in_flight == 1 {
        return items.iter().map(&f).collect();
    }
    let queue: Mutex<VecDeque<usize>> = Mutex::new((0..items.len()).collect());
    let results: Mutex<Vec<Option<R>>> =
        Mutex::new(items.iter().map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..max_in_flight {
            scope.spawn(|| loop {
                let idx = match queue.lock().expect("queue lock").pop_front() {
                    Some(idx) => idx,
                    None => break,
                };
                let out = f(&items[idx]);
                results.lock().expect("results lock")[idx] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|r| r.expect("every index processed"))
        .collect()
}
