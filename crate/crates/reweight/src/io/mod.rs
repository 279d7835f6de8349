//! File formats consumed and produced by the experiment runners.
//!
//! Parsers take raw bytes or strings and never trust their input: every
//! length is validated before allocation and every failure is a typed
//! error. These entry points are exercised directly by the fuzz targets
//! under `fuzz/fuzz_targets/`.

pub mod config;
pub mod matrix_csv;
pub mod movielens;
pub mod pgm;
pub mod results;
pub mod triplets;

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("dataset file missing: {0}")]
    DatasetMissing(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            line,
            message: message.into(),
        }
    }
}
