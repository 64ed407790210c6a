use std::fmt;

use a4d_core::orchestrator::ErrorKind;
use a4d_core::Error;

/// Process exit codes.
pub const OK: u8 = 0;
pub const DOMAIN_FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const INFRASTRUCTURE: u8 = 3;

/// An error on its way to becoming an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn infra(message: impl Into<String>) -> Self {
        CliError {
            code: INFRASTRUCTURE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Bad input from the user is a usage error; anything the environment got
/// wrong (tools, endpoint, disk) is infrastructure.
pub fn code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::UnknownBackend(_)
        | Error::InvalidBackend { .. }
        | Error::InvalidTarget { .. }
        | Error::InvalidSource(_)
        | Error::InvalidSuite(_)
        | Error::CorpusMalformed(_)
        | Error::Json { .. } => USAGE,
        _ => INFRASTRUCTURE,
    }
}

pub fn code_for_kind(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::InvalidInput => USAGE,
        _ => INFRASTRUCTURE,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError {
            code: code_for(&err),
            message: err.to_string(),
        }
    }
}
