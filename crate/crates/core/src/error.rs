use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: duplicate edge {src} -> {dst}")]
    DuplicateEdge { line: usize, src: String, dst: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("column {0} is empty")]
    EmptyColumn(usize),

    #[error("sketch length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {0} has no non-zeros to sample from")]
    InertSampler(usize),

    #[error("internal consistency violated: {0}")]
    Inconsistent(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
