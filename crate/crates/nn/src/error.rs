use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input {height}x{width} is too small: at least {min}x{min} is required")]
    InputTooSmall { height: usize, width: usize, min: usize },
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed weights file: {0}")]
    BadWeights(String),
    #[error("architecture mismatch: weights describe {found:?}, expected {expected:?}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("unknown architecture {0:?}")]
    UnknownArchitecture(String),
}
