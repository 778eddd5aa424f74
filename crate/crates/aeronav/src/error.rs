//! Crate-wide error type.
//!
//! One enum keeps the CLI's exit-code mapping in a single place; modules
//! return `crate::Result` throughout.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a mathematical precondition (degenerate polygon,
    /// non-positive altitude, zero-area box, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Tensor shapes do not line up for the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// The caller misused an API or passed invalid flags.
    #[error("usage error: {0}")]
    Usage(String),

    /// A bounded container (memory buffer) is full.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A word is missing from the vocabulary.
    #[error("vocabulary error: unknown token `{0}`")]
    Vocabulary(String),

    /// Procedural generation could not satisfy its constraints.
    #[error("generation error: {0}")]
    Generation(String),

    /// The requested view does not overlap the world.
    #[error("render error: {0}")]
    Render(String),

    /// An instruction does not match the template grammar.
    #[error("paraphrase error: {0}")]
    Paraphrase(String),

    /// A non-finite value surfaced during training.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Checkpoint and configuration disagree.
    #[error("incompatible checkpoint: {0}")]
    Compat(String),

    /// A config or data file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The gradient-check suite found a mismatch.
    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
