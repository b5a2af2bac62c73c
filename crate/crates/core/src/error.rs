use std::path::PathBuf;

use thiserror::Error;

use crate::kg::Triple;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{split} split references unknown {kind} `{symbol}` in {triple}")]
    UnknownSymbol {
        split: &'static str,
        kind: &'static str,
        symbol: String,
        /// `(head, relation, tail)` as written in the file.
        triple: String,
    },

    #[error("positive triple ({0}, {1}, {2}) appears in more than one split")]
    OverlappingSplits(String, String, String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("{kind} id {id} out of range (size {size})")]
    OutOfRange { kind: &'static str, id: usize, size: usize },

    #[error("replacement entity equals the entity already at that position in {0:?}")]
    NoOpCorruption(Triple),

    #[error("training split is empty")]
    EmptyTrainSplit,

    #[error("test split is empty")]
    EmptyTestSplit,

    #[error("non-finite parameter detected after epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("neighborhood or example set is empty")]
    EmptyExamples,

    #[error("feature row vocabulary does not match the model vocabulary")]
    VocabularyMismatch,

    #[error("surrogate predicts {surrogate} but the embedding predicts {embedding}; refusing to explain")]
    Disagreement { surrogate: bool, embedding: bool },

    #[error("no template for relation `{0}`")]
    MissingTemplate(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("need at least {needed} candidate entities, found {found}")]
    TooFewCandidates { needed: usize, found: usize },

    #[error("correction references unknown review item `{0}`")]
    DanglingExplanation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
