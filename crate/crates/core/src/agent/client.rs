//! Model endpoints: an HTTP chat-completions client and a scripted client
//! for offline runs, plus the retry/backoff policy shared by both.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::PromptBundle;
use super::AgentConfig;
use crate::error::{Error, Result};
use crate::model::ConstraintLevel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn from_bundle(bundle: &PromptBundle, cfg: &AgentConfig, max_tokens: u32) -> Self {
        ChatRequest {
            model: cfg.model_name.clone(),
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: bundle.system_instruction.clone(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: bundle.user_message(),
                },
            ],
            temperature: cfg.temperature,
            max_tokens,
        }
    }

    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub content: String,
    /// The endpoint stopped at the token limit.
    pub truncated: bool,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Response body as received, for the request log.
    pub raw: Value,
}

impl ChatReply {
    pub fn text(content: impl Into<String>) -> Self {
        let content = content.into();
        ChatReply {
            raw: json!({ "choices": [{ "message": { "role": "assistant", "content": content }, "finish_reason": "stop" }] }),
            content,
            truncated: false,
            tokens_in: 0,
            tokens_out: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientError {
    Transport(String),
    RateLimited(String),
    Server(String),
    Auth(String),
    /// Not worth retrying (bad request, exhausted transcript).
    Fatal(String),
}

impl ClientError {
    pub fn retryable(&self) -> bool {
        matches!(self, ClientError::Transport(_) | ClientError::RateLimited(_) | ClientError::Server(_))
    }

    pub fn message(&self) -> &str {
        match self {
            ClientError::Transport(m)
            | ClientError::RateLimited(m)
            | ClientError::Server(m)
            | ClientError::Auth(m)
            | ClientError::Fatal(m) => m,
        }
    }
}

/// Who a request is for; never sent over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestContext {
    pub binary: String,
    pub binary_id: String,
    pub iteration: u32,
    pub level: Option<ConstraintLevel>,
}

pub trait ModelClient: Send + Sync {
    fn send(&self, request: &ChatRequest, ctx: &RequestContext) -> std::result::Result<ChatReply, ClientError>;
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, duration: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, duration: Duration) {
        thread::sleep(duration);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    delays: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, duration: Duration) {
        self.delays.lock().unwrap().push(duration);
    }
}

/// Spaces requests at least `60 / requests_per_minute` seconds apart.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        RateLimiter {
            interval: Duration::from_secs(60) / requests.max(1),
            next: Mutex::new(None),
        }
    }

    /// Time the caller must wait before sending; reserves the slot.
    fn reserve(&self, now: Instant) -> Duration {
        let mut next = self.next.lock().unwrap();
        let slot = match *next {
            Some(t) if t > now => t,
            _ => now,
        };
        *next = Some(slot + self.interval);
        slot - now
    }

    pub fn acquire(&self) {
        let wait = self.reserve(Instant::now());
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

/// One request/response exchange, as written to the agent log.
#[derive(Debug, Clone, Serialize)]
pub struct Exchange {
    pub attempt: u32,
    pub request: ChatRequest,
    pub response: Option<Value>,
    pub error: Option<String>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub retries: u32,
    pub delays: Vec<Duration>,
    pub escalated: bool,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub exchanges: Vec<Exchange>,
}

/// Sends `bundle`, retrying retryable failures with exponential backoff
/// (`base · 2^k` before retry k+1) up to `cfg.max_retries` times. A reply
/// cut at the token limit gets one re-attempt at the escalated limit.
pub fn complete(
    client: &dyn ModelClient,
    bundle: &PromptBundle,
    cfg: &AgentConfig,
    ctx: &RequestContext,
    sleeper: &dyn Sleeper,
    limiter: Option<&RateLimiter>,
) -> Result<Completion> {
    let mut max_tokens = cfg.max_output_tokens;
    let mut escalated = false;
    let mut retries = 0u32;
    let mut delays = Vec::new();
    let mut exchanges = Vec::new();
    let (mut tokens_in, mut tokens_out) = (0u64, 0u64);
    loop {
        let request = ChatRequest::from_bundle(bundle, cfg, max_tokens);
        if let Some(limiter) = limiter {
            limiter.acquire();
        }
        let started = Instant::now();
        let result = client.send(&request, ctx);
        let latency_ms = started.elapsed().as_millis() as u64;
        let attempt = exchanges.len() as u32 + 1;
        match result {
            Ok(reply) => {
                exchanges.push(Exchange {
                    attempt,
                    request,
                    response: Some(reply.raw.clone()),
                    error: None,
                    latency_ms,
                });
                tokens_in += reply.tokens_in;
                tokens_out += reply.tokens_out;
                if reply.truncated && !escalated && cfg.escalated_output_tokens > max_tokens {
                    escalated = true;
                    max_tokens = cfg.escalated_output_tokens;
                    continue;
                }
                return Ok(Completion {
                    text: reply.content,
                    retries,
                    delays,
                    escalated,
                    tokens_in,
                    tokens_out,
                    exchanges,
                });
            }
            Err(err) => {
                exchanges.push(Exchange {
                    attempt,
                    request,
                    response: None,
                    error: Some(format!("{err:?}")),
                    latency_ms,
                });
                if let ClientError::Auth(msg) = err {
                    return Err(Error::Auth(msg));
                }
                if err.retryable() && retries < cfg.max_retries {
                    let delay = Duration::from_millis(cfg.backoff_base_ms.saturating_mul(1u64 << retries.min(20)));
                    sleeper.sleep(delay);
                    delays.push(delay);
                    retries += 1;
                    continue;
                }
                tracing::error!(binary = %ctx.binary, attempts = attempt, error = %err.message(), "model endpoint failed");
                return Err(Error::EndpointUnavailable {
                    attempts: attempt,
                    last_error: err.message().to_owned(),
                });
            }
        }
    }
}

/// Chat-completions client over HTTP.
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient")
            .field("endpoint", &self.endpoint)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient {
            agent,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
        }
    }

    /// Endpoint from `cfg` (or `A4D_ENDPOINT`), key from the environment
    /// variable named by `cfg.api_key_env`.
    pub fn from_env(cfg: &AgentConfig) -> Result<Self> {
        let endpoint = std::env::var("A4D_ENDPOINT")
            .ok()
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| cfg.endpoint_url.clone());
        if endpoint.is_empty() {
            return Err(Error::Config("no model endpoint configured (set A4D_ENDPOINT)".into()));
        }
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| Error::Auth(format!("environment variable {} is not set", cfg.api_key_env)))?;
        Ok(HttpClient::new(endpoint, key, Duration::from_secs(cfg.request_timeout_s)))
    }

    fn parse(body: Value) -> std::result::Result<ChatReply, ClientError> {
        let choice = body
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| ClientError::Fatal("response has no choices".into()))?;
        let content = choice
            .pointer("/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ClientError::Fatal("response has no message content".into()))?
            .to_owned();
        let truncated = choice.get("finish_reason").and_then(Value::as_str) == Some("length");
        let usage = |key: &str| body.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
        Ok(ChatReply {
            content,
            truncated,
            tokens_in: usage("prompt_tokens"),
            tokens_out: usage("completion_tokens"),
            raw: body,
        })
    }
}

impl ModelClient for HttpClient {
    fn send(&self, request: &ChatRequest, _ctx: &RequestContext) -> std::result::Result<ChatReply, ClientError> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let snippet = || format!("HTTP {status}: {}", text.chars().take(300).collect::<String>());
        match status {
            200..=299 => {
                let body: Value = serde_json::from_str(&text).map_err(|e| ClientError::Fatal(format!("bad JSON: {e}")))?;
                Self::parse(body)
            }
            401 | 403 => Err(ClientError::Auth(snippet())),
            408 | 429 => Err(ClientError::RateLimited(snippet())),
            500..=599 => Err(ClientError::Server(snippet())),
            _ => Err(ClientError::Fatal(snippet())),
        }
    }
}

/// One scripted step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    /// Reply with this text.
    Reply(String),
    /// Reply with this text but flag it as cut at the token limit.
    Truncated(String),
    /// Reply with the current code from the request, unchanged.
    Echo,
    /// Fail with a transport / rate-limit / server / auth error.
    Fail(FailKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailKind {
    Transport,
    RateLimit,
    Server,
    Auth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhenExhausted {
    /// Keep replying with the unchanged code.
    #[default]
    Echo,
    Fail,
}

/// Scripted replies, keyed by binary name with a default script.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default)]
    pub default: Vec<Step>,
    #[serde(default)]
    pub binaries: BTreeMap<String, Vec<Step>>,
    #[serde(default)]
    pub exhausted: WhenExhausted,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
    }

    pub fn digest(&self) -> String {
        crate::model::text_digest(&serde_json::to_string(self).expect("transcript serializes"))
    }
}

/// Offline client replaying a [`Transcript`]. Each binary consumes its own
/// script independently.
#[derive(Debug)]
pub struct ScriptedClient {
    transcript: Transcript,
    queues: Mutex<BTreeMap<String, VecDeque<Step>>>,
}

impl ScriptedClient {
    pub fn new(transcript: Transcript) -> Self {
        ScriptedClient {
            transcript,
            queues: Mutex::new(BTreeMap::new()),
        }
    }

    /// A client that answers every binary with `steps`.
    pub fn with_steps(steps: Vec<Step>) -> Self {
        ScriptedClient::new(Transcript {
            default: steps,
            ..Transcript::default()
        })
    }

    fn next_step(&self, binary: &str) -> Option<Step> {
        let mut queues = self.queues.lock().unwrap();
        let queue = queues.entry(binary.to_owned()).or_insert_with(|| {
            self.transcript
                .binaries
                .get(binary)
                .unwrap_or(&self.transcript.default)
                .iter()
                .cloned()
                .collect()
        });
        queue.pop_front()
    }
}

/// The `## Current code` section of a user message.
pub fn current_code_of(user_message: &str) -> &str {
    user_message
        .split_once("## Current code\n")
        .map(|(_, code)| code)
        .unwrap_or("")
}

impl ModelClient for ScriptedClient {
    fn send(&self, request: &ChatRequest, ctx: &RequestContext) -> std::result::Result<ChatReply, ClientError> {
        let step = match self.next_step(&ctx.binary) {
            Some(step) => step,
            None => match self.transcript.exhausted {
                WhenExhausted::Echo => Step::Echo,
                WhenExhausted::Fail => return Err(ClientError::Fatal(format!("transcript exhausted for {}", ctx.binary))),
            },
        };
        match step {
            Step::Reply(text) => Ok(ChatReply::text(text)),
            Step::Truncated(text) => {
                let mut reply = ChatReply::text(text);
                reply.truncated = true;
                Ok(reply)
            }
            Step::Echo => Ok(ChatReply::text(current_code_of(request.user_content()))),
            Step::Fail(kind) => Err(match kind {
                FailKind::Transport => ClientError::Transport("scripted transport failure".into()),
                FailKind::RateLimit => ClientError::RateLimited("scripted rate limit".into()),
                FailKind::Server => ClientError::Server("scripted server error".into()),
                FailKind::Auth => ClientError::Auth("scripted auth failure".into()),
            }),
        }
    }
}
