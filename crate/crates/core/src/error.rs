use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("timestamps out of order for traveler {traveler_id}: {previous} followed by {next}")]
    NonMonotonicTimestamps { traveler_id: String, previous: i64, next: i64 },

    #[error("vocabulary is empty after pruning with min_count = {min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("sequence is empty")]
    EmptySequence,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label {0} is not 0 or 1")]
    InvalidLabel(f64),

    #[error("unknown destination `{0}`")]
    UnknownDestination(String),

    #[error("no destinations available")]
    NoDestinations,

    #[error("{what}, line {line}: {message}")]
    Format { what: &'static str, line: usize, message: String },

    #[error("{malformed} of {total} lines malformed (limit is 1%)")]
    TooManyMalformed { malformed: usize, total: usize },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn format(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format { what, line, message: message.into() }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for errors caused by the data handed in rather than by the program.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            Error::Io(_) | Error::Config(_) => false,
            _ => true,
        }
    }
}
