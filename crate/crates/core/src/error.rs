use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::Triple;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("{kind} id {id} out of range (have {count})")]
    IdOutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },

    #[error(
        "non-finite gradient on triple ({}, {}, {}){}",
        triple.h,
        triple.r,
        triple.t,
        epoch.map(|e| format!(" in epoch {e}")).unwrap_or_default()
    )]
    NonFinite { triple: Triple, epoch: Option<usize> },

    #[error("cannot corrupt a triple with fewer than 2 entities (have {0})")]
    TooFewEntities(usize),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
