use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::container::ContainerError;
use crate::corpus::CorpusError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("{0}: empty sequence")]
    EmptySequence(&'static str),
    #[error("{op}: expected dimension {expected}, got {got}")]
    Dimension { op: &'static str, expected: usize, got: usize },
    #[error("gold tag `{0}` is not in the model tagset")]
    UnknownTag(String),
    #[error("training diverged: non-finite loss at epoch {epoch}, sentence {sentence}")]
    Divergence { epoch: usize, sentence: usize },
    #[error("{path}:{line}: {message}")]
    Embeddings { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 3,
            Error::Config(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
