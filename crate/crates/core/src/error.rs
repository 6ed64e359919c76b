use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum RlrError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at column {column}: {message} (input: `{input}`)")]
    Parse {
        input: String,
        column: usize,
        message: String,
    },

    #[error("candidate limit exceeded: {count} formulae generated, cap is {cap}")]
    CandidateLimit { count: usize, cap: usize },

    #[error("{file}:{line}: {message}")]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("hidden-feature training diverged after {restarts} learning-rate halvings")]
    Diverged { restarts: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, RlrError>;

impl RlrError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        RlrError::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RlrError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        RlrError::Csv {
            path: path.into(),
            source,
        }
    }
}

impl RlrError {
    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            RlrError::Validation(_) => "validation",
            RlrError::Parse { .. } => "parse",
            RlrError::CandidateLimit { .. } => "candidate_limit",
            RlrError::Load { .. } => "load",
            RlrError::ModelFormat(_) => "model_format",
            RlrError::Diverged { .. } => "diverged",
            RlrError::Config(_) => "config",
            RlrError::Io { .. } => "io",
            RlrError::Csv { .. } => "csv",
        }
    }
}
