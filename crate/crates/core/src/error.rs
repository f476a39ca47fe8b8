use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Why a state falls outside the region where the closed-form bank model holds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("hull touches or crosses the starboard bank (clearance {clearance:.6} m)")]
    StarboardContact { clearance: f64 },
    #[error("hull touches or crosses the port bank (clearance {clearance:.6} m)")]
    PortContact { clearance: f64 },
    #[error("heading {psi:.6} rad is transverse to the canal; clearances are unbounded")]
    TransverseHeading { psi: f64 },
    #[error("non-finite state value")]
    NonFinite,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("outside model validity: {0}")]
    Domain(#[from] DomainError),
    #[error("record {index}: {source}")]
    RecordDomain { index: usize, source: DomainError },
    #[error("invalid value: {0}")]
    Value(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column \"{0}\"")]
    Schema(String),
    #[error("mass matrix is singular (det = {det:e})")]
    SingularMass { det: f64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn value(msg: impl Into<String>) -> Self {
        Error::Value(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
