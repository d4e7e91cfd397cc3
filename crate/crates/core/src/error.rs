use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the haiku pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corpus has {0} haikus, at least 2 are needed to split")]
    CorpusTooSmall(usize),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("vocabulary has {0} words, at least {1} required")]
    VocabTooSmall(usize, usize),

    #[error("not a word: {0:?}")]
    NotAWord(String),

    #[error("word not in vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("every candidate word is banned")]
    AllWordsBanned,

    #[error("no completion reaches the syllable budget {0}")]
    NoCompletion(u32),

    #[error("requested {requested} items but only {available} are available")]
    NotEnoughItems { requested: usize, available: usize },

    #[error("unknown item ids in scores: {0:?}")]
    UnknownItems(Vec<String>),

    #[error("training diverged at epoch {epoch}: loss is {loss}; try a lower learning rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("malformed {format} data at line {line}: {message}")]
    Format {
        format: &'static str,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            format,
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
