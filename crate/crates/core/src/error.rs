use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed row in a delimited input file.
    #[error("{source_name}, line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    /// An event type outside the closed vocabulary.
    #[error("unknown event type {name:?}{}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Vocabulary { name: String, line: Option<u64> },

    /// An identifier that refers to something that does not exist.
    #[error("referential error: {0}")]
    Referential(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Data that is well-formed but internally contradictory.
    #[error("data inconsistency: {0}")]
    Inconsistent(String),

    #[error("non-finite objective at iteration {iteration} (offending coordinate: {coordinate})")]
    NonFinite { iteration: usize, coordinate: String },

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by bad inputs, as opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite { .. } | Error::Sampler(_) | Error::Io { .. }
        )
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
