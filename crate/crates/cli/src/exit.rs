//! Process exit codes and error classification.

use std::fmt;

use psihash::Error;

/// Stable exit codes. `0` is success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    /// `validate`: at least one constraint failed.
    ValidationFailed = 1,
    /// Unreadable or malformed input, config, indices or experiment settings.
    MalformedInput = 2,
    /// Flags do not describe a buildable pipeline or structure.
    InvalidPipeline = 3,
    /// Exact chromatic mode met a graph above the vertex cap.
    ExactCapExceeded = 4,
    /// An experiment finished but one of its configured checks failed.
    CheckFailed = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// Errors raised while reading inputs or hashing rows.
    pub fn input(e: Error) -> Self {
        let code = match &e {
            Error::GraphTooLargeForExact { .. } => ExitCode::ExactCapExceeded,
            Error::NonBinaryQuantizer(_) => ExitCode::InvalidPipeline,
            _ => ExitCode::MalformedInput,
        };
        Self::new(code, e.to_string())
    }

    /// Errors raised while building a pipeline or structure from flags.
    pub fn pipeline(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Json(_) | Error::Format(_) => ExitCode::MalformedInput,
            Error::GraphTooLargeForExact { .. } => ExitCode::ExactCapExceeded,
            _ => ExitCode::InvalidPipeline,
        };
        Self::new(code, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
