//! Chat-completion clients: the interface, an HTTP implementation and test stubs.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
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

/// Failure to obtain any answer from the model. Callers may retry these.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Request(String),
    #[error("server answered with status {0}")]
    Status(u16),
    #[error("malformed completion payload: {0}")]
    Payload(String),
    #[error("client configuration: {0}")]
    Config(String),
    #[error("stub has no response left")]
    Exhausted,
}

pub trait ChatClient: Send + Sync {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, TransportError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, TransportError> {
        (**self).send(messages, temperature)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, TransportError> {
        (**self).send(messages, temperature)
    }
}

/// Endpoint settings; the API key itself only ever comes from the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    /// OpenAI-compatible `/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "SCENGEN_API_KEY".into(),
            timeout_secs: 120,
        }
    }
}

pub struct HttpChatClient {
    config: ChatConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatClient").field("config", &self.config).finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AnswerMessage,
}

#[derive(Deserialize)]
struct AnswerMessage {
    content: Option<String>,
}

impl HttpChatClient {
    /// Reads the key from `config.api_key_env`; fails if it is unset or empty.
    pub fn from_env(config: ChatConfig) -> Result<Self, TransportError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| TransportError::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: ChatConfig, api_key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, api_key, agent }
    }

    pub fn config(&self) -> &ChatConfig {
        &self.config
    }
}

impl ChatClient for HttpChatClient {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, TransportError> {
        let body = CompletionRequest { model: &self.config.model, messages, temperature };
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| TransportError::Request(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status));
        }
        let parsed: CompletionResponse =
            response.body_mut().read_json().map_err(|e| TransportError::Payload(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError::Payload("no choices in completion".into()))
    }
}

/// One recorded request to a stub.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

/// Canned responses, optionally cycled, with every request recorded.
#[derive(Debug)]
pub struct StubClient {
    responses: Mutex<VecDeque<Result<String, TransportError>>>,
    repeat_last: bool,
    log: Mutex<Vec<Exchange>>,
}

impl StubClient {
    /// Always answers `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        Self::scripted(vec![Ok(text.into())], true)
    }

    /// Answers in order; once drained, repeats the last entry if `repeat_last`, else fails.
    pub fn scripted(responses: Vec<Result<String, TransportError>>, repeat_last: bool) -> Self {
        Self { responses: Mutex::new(responses.into()), repeat_last, log: Mutex::new(Vec::new()) }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().expect("stub log").clone()
    }
}

impl ChatClient for StubClient {
    fn send(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, TransportError> {
        self.log.lock().expect("stub log").push(Exchange { messages: messages.to_vec(), temperature });
        let mut queue = self.responses.lock().expect("stub queue");
        match queue.len() {
            0 => Err(TransportError::Exhausted),
            1 if self.repeat_last => queue.front().cloned().expect("non-empty"),
            _ => queue.pop_front().expect("non-empty"),
        }
    }
}
