use std::path::PathBuf;

/// Errors raised anywhere in the fitting and selection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("parameter vector has length {got}, architecture needs {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("residual sum of squares is zero; likelihood is unbounded")]
    DegenerateFit,

    #[error("every random start produced a non-finite residual sum of squares")]
    AllStartsFailed,

    #[error("{n} observations cannot identify {k} network parameters plus the error variance (need n >= K + 2)")]
    UnderdeterminedFit { n: usize, k: usize },

    #[error("holdout set is empty")]
    EmptyHoldout,

    #[error("no candidate in the {0} phase could be fitted")]
    NoViableCandidate(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("column `{0}` is constant on the training rows and cannot be rescaled")]
    ConstantColumn(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;
