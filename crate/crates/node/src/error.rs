use std::io;

use thiserror::Error;

/// Everything that can go wrong on the node, grouped so the CLI can map
/// each group to an exit code.
#[derive(Debug, Error)]
pub enum NodeError {
    #[error("configuration: {0}")]
    Config(String),
    /// Bad or unreadable input data (files, uploads, CLI arguments).
    #[error("input: {0}")]
    Input(String),
    #[error("access denied: {0}")]
    Denied(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid state transition for manifest {id}: {from} -> {to}")]
    Transition { id: i64, from: String, to: String },
    #[error("signal processing: {0}")]
    Pipeline(#[from] fog_core::Error),
    #[error("tls: {0}")]
    Tls(String),
    #[error("sync: {0}")]
    Sync(String),
    #[error("store: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl NodeError {
    pub fn input(msg: impl Into<String>) -> Self {
        NodeError::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        NodeError::Config(msg.into())
    }
}

impl From<rustls::Error> for NodeError {
    fn from(e: rustls::Error) -> Self {
        NodeError::Tls(e.to_string())
    }
}

impl From<hound::Error> for NodeError {
    fn from(e: hound::Error) -> Self {
        NodeError::Input(format!("wav: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, NodeError>;
