//! Failure classification. Every error leaving the CLI belongs to one
//! of three classes, each with a fixed process exit code, and is printed
//! as a single line on standard error.

use std::fmt;

use driftbench::harness::HarnessError;
use driftbench::synth::SynthError;

/// Exit code 1: the configuration (file, flags, or their combination)
/// is invalid. Exit code 2: the data — input files, output paths, or a
/// result document — cannot be read or written. Exit code 3: an
/// internal invariant failed.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(message) => write!(f, "configuration error: {message}"),
            CliError::Data(message) => write!(f, "data error: {message}"),
            CliError::Internal(message) => write!(f, "internal error: {message}"),
        }
    }
}

pub fn config_error(message: impl fmt::Display) -> CliError {
    CliError::Config(one_line(&message.to_string()))
}

pub fn data_error(message: impl fmt::Display) -> CliError {
    CliError::Data(one_line(&message.to_string()))
}

pub fn internal_error(message: impl fmt::Display) -> CliError {
    CliError::Internal(one_line(&message.to_string()))
}

/// Classifies a harness failure: bad parameters are configuration
/// errors, unreadable/unwritable files are data errors, anything else
/// is internal.
pub fn from_harness(error: HarnessError) -> CliError {
    let message = one_line(&error.to_string());
    match error {
        HarnessError::Config(_) | HarnessError::Synth(SynthError::InvalidParameter { .. }) => {
            CliError::Config(message)
        }
        HarnessError::Data(_)
        | HarnessError::Synth(SynthError::Data(_))
        | HarnessError::Io { .. }
        | HarnessError::Csv(_)
        | HarnessError::ModelVersion { .. } => CliError::Data(message),
        HarnessError::IncompleteGrid(_) | HarnessError::Json(_) => CliError::Internal(message),
    }
}

/// Collapses a possibly multi-line message (TOML parse errors carry
/// span art) into the single diagnostic line the terminal contract
/// promises.
pub fn one_line(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}
