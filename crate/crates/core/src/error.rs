use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema parse error at line {line}: {message}")]
    SchemaParse { line: usize, message: String },

    #[error("duplicate label id {0:?}")]
    DuplicateLabel(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("unknown label {raw:?}")]
    UnknownLabel { raw: String },

    #[error("label {label:?} is not valid here; expected one of: {}", .options.join(" | "))]
    InvalidLabel { label: String, options: Vec<String> },

    #[error("teacher response contains no label: {0:?}")]
    UnparseableResponse(String),

    #[error("teacher response names several labels ({}) without a structured answer", .candidates.join(", "))]
    AmbiguousResponse { candidates: Vec<String> },

    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),

    #[error("teacher request failed: {0}")]
    Teacher(String),

    #[error("document {0:?} has no label")]
    Unlabeled(String),

    #[error("infeasible sampling request: {0}")]
    Infeasible(String),

    #[error("language {lang:?} has {available} documents, {requested} requested")]
    InsufficientDocuments {
        lang: String,
        available: usize,
        requested: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("length mismatch: {gold} gold labels vs {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trainer failed: {0}")]
    Trainer(String),

    #[error("unauthorized: {0}")]
    Unauthorized(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
