use thiserror::Error;

use crate::path::PathError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("malformed path `{path}`: {source}")]
    Path {
        path: String,
        #[source]
        source: PathError,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("undefined score: {0}")]
    Score(#[from] ScoreError),

    #[error("training error: {0}")]
    Training(String),

    #[error("{malformed} of {total} input lines are malformed")]
    TooManyMalformed { malformed: usize, total: usize },

    #[error("relation id {id} collides for `{first}` and `{second}`")]
    IdCollision {
        id: String,
        first: String,
        second: String,
    },
}

/// Reasons a statistical score cannot be computed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("empty extension")]
    EmptyExtension,
    #[error("empty intersection")]
    EmptyIntersection,
    #[error("hypothesis probability is {0}")]
    DegeneratePrior(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
