use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index ({c}, {y}, {x}) out of range for shape {shape:?}")]
    OutOfRange {
        c: usize,
        y: usize,
        x: usize,
        shape: [usize; 3],
    },

    #[error("instance mask is empty")]
    EmptyInstance,

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("invalid probability distribution at pixel {pixel}: {reason}")]
    InvalidDistribution { pixel: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("scene generation failed: {0}")]
    GenerationFailure(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
