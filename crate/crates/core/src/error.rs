use crate::backend::BackendError;
use crate::corpus::CorpusError;
use crate::metrics::MetricError;
use crate::pipeline::ConfigError;
use crate::retrieval::IndexError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub(crate) fn for_sample(id: &str, source: impl Into<Error>) -> Self {
        Error::Sample { id: id.to_string(), source: Box::new(source.into()) }
    }

    /// Short machine-readable category, used by the CLI's one-line errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Index(_) => "index",
            Error::Metric(_) => "metric",
            Error::Backend(_) => "backend",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Sample { source, .. } => source.kind(),
            Error::Invalid(_) => "invalid",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
