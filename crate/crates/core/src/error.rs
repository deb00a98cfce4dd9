// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Top-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Pattern(#[from] PatternError),

    /// Malformed line in a vertical tagged corpus.
    #[error("tagged corpus line {line}: {message}")]
    Corpus { line: usize, message: String },

    #[error("alignment: {0}")]
    Alignment(String),

    /// Encoder failure (weights, shapes, numerical invariants).
    #[error("backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Cache(#[from] CacheError),

    #[error("metric: {0}")]
    Metric(String),

    #[error("probe: {0}")]
    Probe(String),

    #[error("projection: {0}")]
    Projection(String),

    #[error("config: {0}")]
    Config(String),

    /// Failure inside one stage of the analysis pipeline.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Self::Stage { .. } => self,
            other => Self::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Process exit code for the command-line tool:
    /// 2 validation, 3 backend, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Stage { source, .. } => source.exit_code(),
            Self::Backend(_) => 3,
            Self::Io { .. } | Self::Cache(_) => 4,
            Self::Dataset(DatasetError::Io { .. }) => 4,
            _ => 2,
        }
    }
}

/// Problems with dataset files and records.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("record `{id}`: {message}")]
    Invalid { id: String, message: String },

    #[error("duplicate record id `{id}` on line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("stratum {stratum} has {available} records, {requested} requested")]
    InsufficientStratum {
        stratum: String,
        available: usize,
        requested: usize,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Pattern parse error with a 1-based column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pattern parse error at column {column}: {message}")]
pub struct PatternError {
    pub column: usize,
    pub message: String,
}

/// Extraction cache integrity errors. Each failure mode is a distinct variant.
#[derive(Debug, Error)]
pub enum CacheError {
    #[error("{file}: format version {found}, expected {expected}")]
    VersionMismatch {
        file: String,
        found: u32,
        expected: u32,
    },

    #[error("{file}: truncated ({len} bytes, header needs {needed})")]
    Truncated {
        file: String,
        len: usize,
        needed: usize,
    },

    #[error("{file}: checksum mismatch")]
    Checksum { file: String },

    #[error("{file}: bad magic bytes")]
    BadMagic { file: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
