use std::io;

use thiserror::Error;

/// Errors raised by training, inference, evaluation and model I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters (vocabulary size too small, empty corpus, bad flag combination).
    #[error("configuration error: {0}")]
    Config(String),

    /// A model file, dataset or lexicon does not follow its expected layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A pretoken cannot be segmented with the current unigram pieces.
    #[error("coverage error: {0}")]
    Coverage(String),

    /// Raw input already contains the reserved space symbol.
    #[error("normalization error: {0}")]
    Normalization(String),

    /// Input bytes are not valid UTF-8.
    #[error("decode error: line {line} is not valid UTF-8")]
    Decode { line: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tool for this class of error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 3,
            Error::Format(_) => 4,
            Error::Io(_) => 5,
            Error::Coverage(_) => 6,
            Error::Normalization(_) => 7,
            Error::Decode { .. } => 8,
        }
    }
}
