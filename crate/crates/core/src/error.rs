use std::path::PathBuf;

/// Errors produced anywhere in the texfuse pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("out of bounds: {0}")]
    Bounds(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dataset root {0} does not exist")]
    DatasetMissing(PathBuf),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("feature ingestion error: {0}")]
    Ingestion(String),

    #[error("descriptor {descriptor} failed on {path}: {source}")]
    Extraction {
        descriptor: String,
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
