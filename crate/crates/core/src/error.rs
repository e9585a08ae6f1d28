use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing input file {path}")]
    MissingFile { path: PathBuf },

    #[error("{table}: header mismatch, expected [{expected}], found [{found}]")]
    Header {
        table: String,
        expected: String,
        found: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("schema mismatch: missing columns [{missing}], unexpected columns [{unexpected}]")]
    Schema { missing: String, unexpected: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorKind::Config,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Column-level diff between an expected schema and the one supplied.
    pub fn schema_diff(expected: &[String], found: &[String]) -> Error {
        let missing: Vec<&str> = expected
            .iter()
            .filter(|c| !found.contains(c))
            .map(String::as_str)
            .collect();
        let unexpected: Vec<&str> = found
            .iter()
            .filter(|c| !expected.contains(c))
            .map(String::as_str)
            .collect();
        Error::Schema {
            missing: missing.join(","),
            unexpected: unexpected.join(","),
        }
    }
}
