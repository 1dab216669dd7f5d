//! Crate-wide error type and result alias.

use std::path::PathBuf;

use thiserror::Error;

use crate::moral::EmotionLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after normalization")]
    EmptyText,

    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no question template matches the utterance")]
    NoTemplateMatch,

    #[error("missing emotion prototype for {0}")]
    MissingPrototype(EmotionLabel),

    #[error("feedback record invalid: {0}")]
    InvalidFeedback(&'static str),

    #[error("unknown turn id {0}")]
    UnknownTurn(u64),

    #[error("unknown session {0}")]
    UnknownSession(String),

    #[error("question bank is empty")]
    EmptyBank,

    #[error("unknown question bank entry {0}")]
    UnknownBankEntry(u64),

    #[error("question bank {path}: line {line} is not a recognized question")]
    BankEntryUnparseable { path: PathBuf, line: usize },

    #[error("config file not found: {0}")]
    MissingFile(PathBuf),

    #[error("config key {key}: {constraint}")]
    InvalidValue { key: String, constraint: String },

    #[error("unknown config key: {0}")]
    UnknownKey(String),

    #[error("storage: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("server: {0}")]
    Server(String),
}

impl Error {
    /// Process exit code for startup failures: 1 for configuration
    /// problems, 2 when the embedding backend cannot be reached.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::BackendUnavailable(_) => 2,
            _ => 1,
        }
    }
}
