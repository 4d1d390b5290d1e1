// SPDX-License-Identifier: Apache-2.0
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV or schema content. Rows and columns are 1-based; row 1
    /// is the first data row after the header.
    #[error("{message} at row {row}, column {column}")]
    Parse {
        message: String,
        row: usize,
        column: usize,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("cycle detected through nodes {0:?}")]
    Cycle(Vec<usize>),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampling budget of {attempts} attempts exhausted: {detail}")]
    BudgetExhausted { attempts: u64, detail: String },

    #[error("experiment failed on split {split}: {source}")]
    Split {
        split: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Validation failures are caller mistakes (bad input files, arguments,
    /// configuration); everything else is a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::InvalidDataset(_)
            | Error::InvalidNetwork(_)
            | Error::Cycle(_)
            | Error::ModelFormat(_)
            | Error::InvalidArgument(_)
            | Error::Config(_) => true,
            Error::Split { source, .. } => source.is_validation(),
            Error::Io { .. } | Error::BudgetExhausted { .. } => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
