use std::io;

use thiserror::Error;

/// Errors raised by the behavior-manifold pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient audio: {0}")]
    InsufficientAudio(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("session too short: {source_id} spans {duration_s:.2} s, need at least {window_s} s")]
    SessionTooShort {
        source_id: String,
        duration_s: f64,
        window_s: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("triplet sampling requires >=2 sources (got {0})")]
    TooFewSources(usize),

    #[error("empty reference set: {0}")]
    EmptyReferences(String),

    #[error("empty tuple set: {0}")]
    EmptyTupleSet(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("invalid feature file: {0}")]
    InvalidFeatureFile(String),

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("wav decode error: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
