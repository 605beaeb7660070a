//! Blocking client for an OpenAI-compatible chat-completions endpoint.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "KG_DISAMBIG_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorMode {
    Service,
    #[default]
    Offline,
}

impl std::str::FromStr for ExtractorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "service" => Ok(ExtractorMode::Service),
            "offline" => Ok(ExtractorMode::Offline),
            other => Err(format!("unknown extractor mode `{other}`")),
        }
    }
}

impl std::fmt::Display for ExtractorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtractorMode::Service => "service",
            ExtractorMode::Offline => "offline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    pub mode: ExtractorMode,
    pub model_name: String,
    pub temperature: f64,
    pub max_attempts: u32,
    pub request_timeout: Duration,
    pub parallelism: usize,
    pub endpoint_url: String,
    /// First retry delay; doubles on every further attempt.
    pub backoff_base: Duration,
    /// Minimum spacing between request starts across all workers.
    pub min_request_interval: Duration,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            mode: ExtractorMode::Offline,
            model_name: "gpt-4".into(),
            temperature: 0.0,
            max_attempts: 3,
            request_timeout: Duration::from_secs(120),
            parallelism: 4,
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            backoff_base: Duration::from_millis(500),
            min_request_interval: Duration::ZERO,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("request timed out")]
    Timeout,
    #[error("request rejected (HTTP {status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed completion payload: {0}")]
    Payload(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP {0}")]
    Status(u16),
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries { attempts: u32, last: Box<ServiceError> },
}

impl ServiceError {
    fn is_retryable(&self) -> bool {
        matches!(self, ServiceError::Transport(_) | ServiceError::Status(_))
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 1],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: Option<String>,
}

pub struct CompletionClient {
    agent: ureq::Agent,
    config: ExtractorConfig,
    api_key: String,
    next_slot: Mutex<Instant>,
}

impl CompletionClient {
    pub fn from_env(config: ExtractorConfig) -> Result<Self, ServiceError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| ServiceError::MissingApiKey)?;
        Ok(CompletionClient::new(config, key))
    }

    pub fn new(config: ExtractorConfig, api_key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        CompletionClient { agent, config, api_key: api_key.into(), next_slot: Mutex::new(Instant::now()) }
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    fn wait_for_slot(&self) {
        if self.config.min_request_interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + self.config.min_request_interval;
            start - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn attempt(&self, prompt: &str) -> Result<String, ServiceError> {
        self.wait_for_slot();
        let request = ChatRequest {
            model: &self.config.model_name,
            temperature: self.config.temperature,
            messages: [ChatMessage { role: "user", content: prompt }],
        };
        let mut response = self
            .agent
            .post(&self.config.endpoint_url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&request)
            .map_err(map_transport)?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(ServiceError::Auth(status)),
            429 | 500..=599 => return Err(ServiceError::Status(status)),
            _ => {
                let body = response.body_mut().read_to_string().unwrap_or_default();
                return Err(ServiceError::Rejected { status, body });
            }
        }
        let parsed: ChatResponse = response.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => ServiceError::Timeout,
            other => ServiceError::Payload(other.to_string()),
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| ServiceError::Payload("no message content in first choice".into()))
    }

    /// Sends `prompt` as one user message. Transport failures, 429 and 5xx
    /// are retried with exponential backoff up to `max_attempts`.
    pub fn request_completion(&self, prompt: &str) -> Result<String, ServiceError> {
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff_base;
        let mut attempt = 1;
        loop {
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retryable() => {
                    if attempt >= attempts {
                        return Err(ServiceError::ExhaustedRetries { attempts, last: Box::new(e) });
                    }
                    log::warn!("completion attempt {attempt}/{attempts} failed: {e}");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

fn map_transport(e: ureq::Error) -> ServiceError {
    match e {
        ureq::Error::Timeout(_) => ServiceError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ServiceError::Timeout,
        other => ServiceError::Transport(other.to_string()),
    }
}
