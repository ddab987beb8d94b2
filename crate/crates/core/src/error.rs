use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Contract violations carry enough context
/// to identify the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("descriptor dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("self edge requested on node {0}")]
    SelfEdge(usize),

    #[error("cell ({x}, {y}) is not a free cell")]
    BlockedCell { x: i32, y: i32 },

    #[error("frontier reward requested with {frontier_new} new frontier nodes on an empty map")]
    EmptyMapFrontier { frontier_new: u32 },

    #[error("topological map is empty")]
    EmptyMap,

    #[error("scenario generation failed: {0}")]
    Scenario(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Configuration document problems. Every variant names the key or the
/// position that caused it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("config key `{key}` out of range: {reason}")]
    Range { key: String, reason: String },

    #[error("config key `{key}` has the wrong type: {message}")]
    Type { key: String, message: String },
}

impl ConfigError {
    /// Name of the offending key, when the error is tied to one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::Range { key, .. } | ConfigError::Type { key, .. } => Some(key),
            ConfigError::Parse { .. } => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
