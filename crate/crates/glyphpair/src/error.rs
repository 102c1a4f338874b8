use std::path::{Path, PathBuf};

use glyphpair_core::corpus::CorpusError;
use glyphpair_core::losses::LossError;
use glyphpair_core::metrics::MetricsError;
use glyphpair_core::synth::SynthError;
use glyphpair_core::{BatchError, ModelError, SplitError, TrainError};
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("record `{id}`: cannot decode {}: {source}", path.display())]
    Decode {
        id: String,
        path: PathBuf,
        source: image::ImageError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => exit::USAGE,
            Error::Model(
                ModelError::UnknownBackbone(_)
                | ModelError::PretrainedUnavailable(_)
                | ModelError::InvalidSpec(_),
            ) => exit::USAGE,
            Error::Train(
                TrainError::NonFinite { .. } | TrainError::Loss(LossError::NonFinite(_)),
            ) => exit::NUMERICAL,
            Error::Train(TrainError::Config(_) | TrainError::Loss(LossError::Config(_))) => {
                exit::USAGE
            }
            Error::Synth(SynthError::Config(_)) => exit::USAGE,
            Error::Metrics(MetricsError::Config(_)) => exit::USAGE,
            _ => exit::DATA,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
