use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("not a probability distribution: {0}")]
    NotADistribution(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown id: {0}")]
    UnknownId(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("aggregation round closed with {got} packets, threshold is {threshold}")]
    ShortRound { got: usize, threshold: usize },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyHistogram => "empty_histogram",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NotADistribution(_) => "not_a_distribution",
            Error::Degenerate(_) => "degenerate",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonFinite(_) => "non_finite",
            Error::UnknownId(_) => "unknown_id",
            Error::Config(_) => "config",
            Error::ShortRound { .. } => "short_round",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}
