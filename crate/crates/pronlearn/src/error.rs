//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid symbol text {0:?}: must be non-empty and contain no whitespace")]
    InvalidSymbol(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entries not alignable under chunk limits (|phonemes| > 2*|graphemes|): {}", .0.join(", "))]
    UnalignableEntries(Vec<String>),

    #[error("grapheme {grapheme:?} of word {word:?} not in model inventory")]
    OovGrapheme { grapheme: String, word: String },

    #[error("language tag {0:?} not seen at training time")]
    UnknownTag(String),

    #[error("sentence {index} has no phoneme annotation")]
    MissingPhones { index: usize },

    #[error("phoneme sequence admits no legal alignment path")]
    NoPath,

    #[error("reference word {0:?} has multiple pronunciations")]
    MultiplePronunciations(String),

    #[error("dictionaries share no words with the reference")]
    EmptyIntersection,

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
