use std::io;

use thiserror::Error;

/// Errors produced anywhere in the style transfer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed npy file: {0}")]
    Format(String),

    #[error("unsupported dtype {found:?}, expected {expected:?}")]
    Dtype { found: String, expected: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("position lists do not partition the grid: {0}")]
    Partition(String),

    #[error("instance too large for exhaustive search: {0} labelings")]
    TooLarge(f64),

    #[error("channel mismatch: content has {content} channels, style has {style}")]
    ChannelMismatch { content: usize, style: usize },

    #[error("cannot form {k} clusters from {points} style feature vectors")]
    NotEnoughPoints { k: usize, points: usize },

    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
