use std::io;

use thiserror::Error;

/// Errors raised while parsing an SCPF feature file.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"SCPF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported SCPF version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),
    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),
    #[error("inconsistent structure: {0}")]
    Structure(String),
    #[error("invalid UTF-8 in {0}")]
    Utf8(&'static str),
}

#[derive(Debug, Error)]
pub enum ScpError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("coordinate ({x}, {y}) out of bounds for {width}x{height}")]
    Bounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("size error: {0}")]
    Size(String),
    #[error("capacity error: requested {requested}, available {available}")]
    Capacity { requested: usize, available: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unknown id {0:?}")]
    Lookup(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("degenerate variance: a series is constant")]
    DegenerateVariance,
    #[error("invalid image: {0}")]
    Image(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ScpError> = std::result::Result<T, E>;
