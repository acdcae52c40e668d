use thiserror::Error;

/// Errors produced by the data pipeline, the numeric kernel and the model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("sentence {sentence_id}: {message}")]
    InvalidSentence {
        sentence_id: String,
        message: String,
    },

    #[error("sentence {sentence_id}: pair ({a}, {b}) carries conflicting classes {first} and {second}")]
    ConflictingClasses {
        sentence_id: String,
        a: String,
        b: String,
        first: String,
        second: String,
    },

    #[error("infeasible generator settings: {0}")]
    InfeasibleSettings(String),

    #[error("type-combination set is {combos} but instances are {instances}")]
    DirectednessMismatch {
        combos: &'static str,
        instances: &'static str,
    },

    #[error("ratio denominator requires a positive count, got 0 positives")]
    ZeroPositives,

    #[error("cannot split {sentences} sentences into {k} folds")]
    BadFoldCount { sentences: usize, k: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("model: {0}")]
    Model(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("length mismatch: predictions {predictions} vs golds {golds}")]
    LengthMismatch { predictions: usize, golds: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
