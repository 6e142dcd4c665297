use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input not found: {0}")]
    InputNotFound(String),
    #[error("corpus unreadable: {path}: {reason}")]
    CorpusUnreadable { path: String, reason: String },
    #[error("function `{0}` not found")]
    TargetNotFound(String),
    #[error("function `{0}` has no body")]
    EmptyTarget(String),
    #[error("context overflow: prompt needs {needed} tokens but the window holds {window}")]
    ContextOverflow { needed: usize, window: usize },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("transcript diverged at call {seq}: recorded request {expected}, got {actual}")]
    TranscriptDiverged {
        seq: usize,
        expected: String,
        actual: String,
    },
    #[error("unparseable response: {0}")]
    Unparseable(String),
    #[error("could not resolve a role-permission pair")]
    PairUnresolved,
    #[error("patch generation failed: {0}")]
    GenerationFailed(String),
    #[error("taxonomy: {0}")]
    Taxonomy(String),
    #[error("invalid data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::TargetNotFound(_) | Error::EmptyTarget(_) => 64,
            Error::InputNotFound(_) | Error::CorpusUnreadable { .. } => 66,
            _ => 70,
        }
    }
}
