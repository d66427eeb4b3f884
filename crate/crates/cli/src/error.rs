//! Error-to-exit-code mapping.
//!
//! Every command exits 0 on success, 1 on a runtime failure, and 2 on a
//! usage or configuration mistake (clap itself also exits 2 on bad flags).

use std::process::ExitCode;

/// A command failure, split by who is at fault: the invocation (exit 2) or
/// the run itself (exit 1).
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable/invalid configuration, out-of-range thresholds.
    Usage(anyhow::Error),
    /// Anything that goes wrong after the configuration was accepted.
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(anyhow::anyhow!(msg.into()))
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }

    pub fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Usage(e) | CliError::Runtime(e) => e,
        }
    }
}

impl From<tdad_core::Error> for CliError {
    fn from(e: tdad_core::Error) -> Self {
        match e {
            // A config value the library rejects is the caller's mistake even
            // when it is only discovered mid-run.
            tdad_core::Error::Config(_) => CliError::Usage(e.into()),
            _ => CliError::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
