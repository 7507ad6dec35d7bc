use std::path::PathBuf;

use thiserror::Error;

use crate::search::PartialTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure raised by a detector backend. The raw cause is kept verbatim.
#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("encoding request: {0}")]
    Encode(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("detector backend: {0}")]
    Backend(#[from] DetectorError),

    #[error("search aborted after {} of {} ranks: {source}", partial.order.len(), partial.region_count)]
    SearchAborted {
        partial: Box<PartialTrace>,
        #[source]
        source: DetectorError,
    },

    #[error("exhaustive search refused: {regions} regions exceeds the cost guard of {limit}")]
    CostGuard { regions: usize, limit: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec: {0}")]
    Image(#[from] ::image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
