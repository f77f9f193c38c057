use std::path::PathBuf;
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::config::ConfigError;
use crate::qmath::StateError;

/// A parameter outside its admissible range.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{name} = {value} violates {constraint}")]
pub struct DomainError {
    pub name: &'static str,
    pub value: f64,
    pub constraint: String,
}

impl DomainError {
    pub fn new(name: &'static str, value: f64, constraint: impl Into<String>) -> Self {
        Self {
            name,
            value,
            constraint: constraint.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid sweep specification: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("sweep table {path} not found; run `lidmas sweep` with the same config first, or pass --regenerate")]
    MissingTable { path: PathBuf },
    #[error("{path}: malformed table: {msg}")]
    Table { path: PathBuf, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
