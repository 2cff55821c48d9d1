use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("index {coords:?} out of range for shape {shape:?}")]
    Index { coords: Vec<usize>, shape: Vec<usize> },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("label {label} out of range for {num_classes} classes")]
    Label { label: usize, num_classes: usize },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("degenerate test: {0}")]
    Degenerate(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding a serialized network.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("bad magic bytes {0:?}, expected \"DSEG\"")]
    BadMagic([u8; 4]),
    #[error("unsupported model version {0}")]
    Version(u16),
    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

/// Failures while decoding a binary PPM/PGM file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("wrong magic: expected {expected}, found {found:?}")]
    Magic { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported maxval {0}, only 255 is accepted")]
    Maxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}
