use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the flow solver and its verification toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rectangle: ({x0}, {x1}) x ({y0}, {y1})")]
    InvalidRect { x0: f64, x1: f64, y0: f64, y1: f64 },

    #[error("mesh resolution must be positive, got {nx} x {ny}")]
    InvalidResolution { nx: usize, ny: usize },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unsupported polynomial degree {0} (expected 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("unsupported component count {0} (expected 1 or 2)")]
    UnsupportedComponents(usize),

    #[error("non-finite value {value} at ({x}, {y})")]
    NonFinite { x: f64, y: f64, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spaces are defined on different meshes")]
    MeshMismatch,

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("matrix is singular: no acceptable pivot in column {column} (pivot magnitude {magnitude:e})")]
    Singular { column: usize, magnitude: f64 },

    #[error("matrix must be square, got {nrows} x {ncols}")]
    NotSquare { nrows: usize, ncols: usize },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("blow-up detected at step {step} (t = {time}): non-finite {field} norm")]
    BlowUp {
        step: usize,
        time: f64,
        field: &'static str,
    },

    #[error("stability check failed: {0}")]
    BoundViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::Step { .. } | Error::BlowUp { .. }) => e,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}
