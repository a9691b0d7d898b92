use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A single rejected input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {} invalid row(s)\n{}", .rows.len(), render_rows(.rows))]
    InvalidRows { path: PathBuf, rows: Vec<RowError> },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),

    #[error(transparent)]
    Numeric(#[from] NumericError),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

fn render_rows(rows: &[RowError]) -> String {
    rows.iter().map(|r| format!("  {r}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

/// Failures of the regression and correlation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("need at least {needed} rows for {columns} column(s), got {rows}")]
    TooFewRows { rows: usize, columns: usize, needed: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("correlation undefined: {0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("R^2 undefined: test targets are constant")]
    ConstantTarget,
    #[error("need at least 2 paired values, got {0}")]
    TooFewPairs(usize),
    #[error("{0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
