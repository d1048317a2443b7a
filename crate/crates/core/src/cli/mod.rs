//! Command-line surface: configuration, dataset ingestion, subcommands and
//! JSON reports. The `dlnk` binary is a thin wrapper around [`run`].

pub mod commands;
pub mod config;
pub mod data;
pub mod report;

use std::path::PathBuf;

use serde::Serialize;

use crate::error::Error;

pub use commands::run;
pub use config::RunConfig;
pub use report::{Report, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Verify,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            Self::Data => 3,
            Self::Numeric => 4,
            Self::Verify => 5,
        }
    }
}

/// Diagnostic printed as one JSON object on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            hint: None,
            file: None,
            line: None,
            column: None,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, message)
    }

    pub fn at(mut self, line: Option<usize>, column: Option<usize>) -> Self {
        self.line = line;
        self.column = column;
        self
    }

    pub fn in_file(mut self, file: impl Into<PathBuf>) -> Self {
        self.file = Some(file.into());
        self
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self, "exit_code": self.exit_code() }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::DofTooSmall { .. } => {
                CliError::config(message).with_hint("adjust the [network] or module section of the config")
            }
            Error::MethodCostExceeded { .. } => {
                CliError::config(message).with_hint("use method \"monte_carlo\" for deeper networks")
            }
            Error::ShapeMismatch(_) => CliError::data(message).with_hint("check the dataset against n0, d and the channel count"),
            Error::DegenerateWeights { .. } => CliError::new(ErrorKind::Numeric, message)
                .with_hint("switch [sampler] method to \"mh\""),
            Error::RankDeficientDesign { .. } => CliError::new(ErrorKind::Numeric, message)
                .with_hint("add independent inputs or set predict.allow_rank_deficient = true"),
            Error::NotPositiveDefinite { .. }
            | Error::NotSymmetric { .. }
            | Error::EigenvalueViolation { .. }
            | Error::SingularGram(_)
            | Error::NonFiniteObjective
            | Error::NoInteriorMinimum { .. } => CliError::new(ErrorKind::Numeric, message),
        }
    }
}
