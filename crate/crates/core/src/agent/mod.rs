//! Repair agents: prompt construction, the model call and code extraction.

pub mod client;
pub mod extract;
pub mod feedback;
pub mod prompt;

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::counters::Counters;
use crate::error::{Error, Result};
use crate::model::{ConstraintLevel, Diagnostics, Origin, SourceUnit, UnitKind};
use client::{complete, Completion, ModelClient, RateLimiter, RequestContext, Sleeper, ThreadSleeper};
pub use client::{HttpClient, ScriptedClient, Step, Transcript};
pub use prompt::{build_prompt, PromptBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Used once when a reply is cut at `max_output_tokens`.
    pub escalated_output_tokens: u32,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub requests_per_minute: Option<u32>,
    pub request_timeout_s: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            temperature: 0.0,
            max_output_tokens: 4096,
            escalated_output_tokens: 8192,
            max_retries: 3,
            backoff_base_ms: 1000,
            endpoint_url: String::new(),
            model_name: String::new(),
            api_key_env: "A4D_API_KEY".into(),
            requests_per_minute: None,
            request_timeout_s: 120,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::Config("max_output_tokens must be positive".into()));
        }
        if self.requests_per_minute == Some(0) {
            return Err(Error::Config("requests_per_minute must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one repair call.
#[derive(Debug, Clone, Serialize)]
pub struct RepairAttempt {
    pub iteration: u32,
    pub level: ConstraintLevel,
    pub prompt: PromptBundle,
    pub raw_reply: String,
    pub repaired: SourceUnit,
    pub retries: u32,
    pub escalated: bool,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

/// Turns a model reply into a source unit.
pub fn extract_code(raw: &str, origin: Origin, kind: UnitKind) -> Result<SourceUnit> {
    let code = extract::extract_code_text(raw).ok_or(Error::EmptyRepair)?;
    SourceUnit::new(code, origin, kind).map_err(|_| Error::EmptyRepair)
}

/// Appends JSON lines to `<dir>/agent-<binary id>.jsonl`.
#[derive(Debug)]
pub struct AgentLog {
    dir: PathBuf,
    files: Mutex<std::collections::HashMap<String, File>>,
}

impl AgentLog {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        AgentLog {
            dir: dir.into(),
            files: Mutex::new(Default::default()),
        }
    }

    pub fn path_for(&self, binary_id: &str) -> PathBuf {
        self.dir.join(format!("agent-{binary_id}.jsonl"))
    }

    pub fn append(&self, binary_id: &str, entry: &serde_json::Value) -> Result<()> {
        let mut files = self.files.lock().unwrap_or_else(|e| e.into_inner());
        if !files.contains_key(binary_id) {
            fs::create_dir_all(&self.dir).map_err(|e| Error::io(format!("creating {}", self.dir.display()), e))?;
            let path = self.path_for(binary_id);
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
            files.insert(binary_id.to_owned(), file);
        }
        let file = files.get_mut(binary_id).expect("inserted above");
        let mut line = serde_json::to_vec(entry).map_err(|e| Error::json("serializing log entry", e))?;
        line.push(b'\n');
        file.write_all(&line)
            .map_err(|e| Error::io(format!("writing {}", self.path_for(binary_id).display()), e))
    }

    pub fn read(path: &Path) -> Result<Vec<serde_json::Value>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::json(format!("parsing {}", path.display()), e)))
            .collect()
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Level-specialized repair agent. Stateless between calls: each prompt is
/// built from the current source and diagnostics alone.
pub struct RepairAgent {
    client: Arc<dyn ModelClient>,
    config: AgentConfig,
    sleeper: Arc<dyn Sleeper>,
    limiter: Option<RateLimiter>,
    counters: Arc<Counters>,
    log: Option<Arc<AgentLog>>,
}

impl std::fmt::Debug for RepairAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RepairAgent").field("config", &self.config).finish_non_exhaustive()
    }
}

impl RepairAgent {
    pub fn new(client: Arc<dyn ModelClient>, config: AgentConfig) -> Self {
        let limiter = config.requests_per_minute.map(RateLimiter::per_minute);
        RepairAgent {
            client,
            config,
            sleeper: Arc::new(ThreadSleeper),
            limiter,
            counters: Arc::new(Counters::default()),
            log: None,
        }
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn with_counters(mut self, counters: Arc<Counters>) -> Self {
        self.counters = counters;
        self
    }

    pub fn with_log(mut self, log: Arc<AgentLog>) -> Self {
        self.log = Some(log);
        self
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn counters(&self) -> &Arc<Counters> {
        &self.counters
    }

    /// Asks the agent for `diag.level` to repair `source`. `iteration` is the
    /// 1-based repair number.
    pub fn repair(&self, source: &SourceUnit, diag: &Diagnostics, ctx: &RequestContext) -> Result<RepairAttempt> {
        let level = diag.level;
        if level == ConstraintLevel::Pass {
            return Err(Error::Config("nothing to repair: source already passes".into()));
        }
        let bundle = build_prompt(source, diag, level.passed());
        let ctx = RequestContext {
            level: Some(level),
            ..ctx.clone()
        };
        let result = complete(
            self.client.as_ref(),
            &bundle,
            &self.config,
            &ctx,
            self.sleeper.as_ref(),
            self.limiter.as_ref(),
        );
        let completion = match result {
            Ok(c) => c,
            Err(e) => {
                self.counters.record_model();
                self.log_failure(&ctx, &e);
                return Err(e);
            }
        };
        for _ in &completion.exchanges {
            self.counters.record_model();
        }
        self.log_exchanges(&ctx, &completion);

        let origin = Origin::Repair {
            level,
            iteration: ctx.iteration.max(1),
        };
        let repaired = extract_code(&completion.text, origin, source.unit_kind);
        self.log_repair(&ctx, source, repaired.as_ref().ok());
        let repaired = repaired?;
        Ok(RepairAttempt {
            iteration: ctx.iteration,
            level,
            prompt: bundle,
            raw_reply: completion.text,
            repaired,
            retries: completion.retries,
            escalated: completion.escalated,
            tokens_in: completion.tokens_in,
            tokens_out: completion.tokens_out,
        })
    }

    fn write_log(&self, ctx: &RequestContext, entry: serde_json::Value) {
        if let Some(log) = &self.log {
            let key = if ctx.binary_id.is_empty() { &ctx.binary } else { &ctx.binary_id };
            if let Err(e) = log.append(key, &entry) {
                tracing::warn!(error = %e, "could not write agent log");
            }
        }
    }

    fn log_exchanges(&self, ctx: &RequestContext, completion: &Completion) {
        for ex in &completion.exchanges {
            self.write_log(
                ctx,
                json!({
                    "kind": "exchange",
                    "time_ms": unix_ms(),
                    "binary": ctx.binary,
                    "iteration": ctx.iteration,
                    "level": ctx.level,
                    "attempt": ex.attempt,
                    "request": ex.request,
                    "response": ex.response,
                    "error": ex.error,
                    "latency_ms": ex.latency_ms,
                }),
            );
        }
    }

    fn log_failure(&self, ctx: &RequestContext, err: &Error) {
        self.write_log(
            ctx,
            json!({
                "kind": "failure",
                "time_ms": unix_ms(),
                "binary": ctx.binary,
                "iteration": ctx.iteration,
                "level": ctx.level,
                "error": err.to_string(),
            }),
        );
    }

    fn log_repair(&self, ctx: &RequestContext, before: &SourceUnit, after: Option<&SourceUnit>) {
        self.write_log(
            ctx,
            json!({
                "kind": "repair",
                "time_ms": unix_ms(),
                "binary": ctx.binary,
                "iteration": ctx.iteration,
                "level": ctx.level,
                "before_digest": before.digest(),
                "after_digest": after.map(SourceUnit::digest),
                "extracted": after.is_some(),
            }),
        );
    }
}
