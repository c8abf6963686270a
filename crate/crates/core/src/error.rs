use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("model `{model}` does not accept parameter `{key}`")]
    UnknownParam { model: String, key: String },

    #[error("invalid batch size p={p} for n={n} particles")]
    BatchSize { n: usize, p: usize },

    #[error("particle {particle} is not covered by the batch schedule")]
    NotCovered { particle: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite coordinate at step {step}, particle {particle}")]
    BlowUp { step: u64, particle: usize },

    #[error("coincident particles {i} and {j}")]
    Coincident { i: usize, j: usize },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("matrix market parse error at line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
