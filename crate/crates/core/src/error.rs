use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("token {token_index} at chars [{char_start}, {char_end}) overlaps no word")]
    UnalignedToken {
        token_index: usize,
        char_start: usize,
        char_end: usize,
    },

    #[error("alignment mismatch: {0}")]
    AlignmentMismatch(String),

    #[error(
        "input of {tokens} tokens exceeds the backend window of {limit} tokens; \
         use --strategy chunk1 or --strategy chunk2"
    )]
    WindowOverflow { tokens: usize, limit: usize },

    #[error("word {word_index} spans {tokens} tokens, more than chunk_size {chunk_size}")]
    WordExceedsChunk {
        word_index: usize,
        tokens: usize,
        chunk_size: usize,
    },

    #[error("chunk {chunk_index}: {source}")]
    Chunk {
        chunk_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("baseline scorer not configured: {0}")]
    ScorerNotConfigured(String),

    #[error("mock score table has no entry for word {0:?}")]
    MissingWord(String),

    #[error("model artifact error in {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error("inference failed: {0}")]
    Inference(String),

    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed after {written} records: {source}")]
    PartialWrite {
        written: usize,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Llm(#[from] crate::llm::LlmError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_chunk(self, chunk_index: usize) -> Self {
        Error::Chunk {
            chunk_index,
            source: Box::new(self),
        }
    }

    /// Stable short tag for machine-parsable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig { .. } => "config",
            Error::InvalidInput(_) => "input",
            Error::UnalignedToken { .. } | Error::AlignmentMismatch(_) => "alignment",
            Error::WindowOverflow { .. } => "window",
            Error::WordExceedsChunk { .. } => "chunking",
            Error::Chunk { source, .. } => source.kind(),
            Error::ScorerNotConfigured(_) | Error::MissingWord(_) => "scorer",
            Error::Artifact { .. } => "artifact",
            Error::Inference(_) => "inference",
            Error::MalformedLine { .. } => "dataset",
            Error::Io { .. } | Error::PartialWrite { .. } => "io",
            Error::Json(_) => "json",
            Error::Llm(_) => "llm",
        }
    }
}
