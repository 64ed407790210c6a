use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by pipeline stages.
///
/// Program misbehavior (wrong output, crash, timeout) is never an error: it
/// is recorded as data in an `ExecutionRecord` or `Diagnostics`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("tool `{tool}` not found on PATH")]
    ToolMissing { tool: String },

    #[error("tool `{tool}` exceeded its {timeout_s}s timeout")]
    ToolTimeout { tool: String, timeout_s: u64 },

    #[error("tool `{tool}` failed: {detail}")]
    ToolFailure { tool: String, detail: String },

    #[error("backend `{backend}` produced no source text")]
    EmptyOutput { backend: String },

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error("invalid backend descriptor `{name}`: {reason}")]
    InvalidBackend { name: String, reason: String },

    #[error("every oracle input failed on the original binary")]
    AllInputsFailed,

    #[error("could not launch `{path}`: {source}")]
    Launch {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("model reply contained no extractable code")]
    EmptyRepair,

    #[error("model endpoint unavailable after {attempts} attempts: {last_error}")]
    EndpointUnavailable { attempts: u32, last_error: String },

    #[error("model endpoint rejected credentials: {0}")]
    Auth(String),

    #[error("malformed corpus: {0}")]
    CorpusMalformed(String),

    #[error("invalid target `{path}`: {reason}")]
    InvalidTarget { path: PathBuf, reason: String },

    #[error("invalid source unit: {0}")]
    InvalidSource(String),

    #[error("invalid test suite: {0}")]
    InvalidSuite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// True for failures caused by the environment (missing tools, dead
    /// endpoints, unreadable files) rather than by the candidate source.
    pub fn is_infrastructure(&self) -> bool {
        !matches!(self, Error::EmptyRepair)
    }
}
