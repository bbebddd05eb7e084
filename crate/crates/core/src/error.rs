use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("detection on line {line} references unknown image_id `{image_id}`")]
    DanglingImage { image_id: String, line: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("label vector has length {got} but the graph has {expected} nodes")]
    LabelLength { expected: usize, got: usize },

    #[error("camera height calibration unavailable: {0}")]
    CalibrationUnavailable(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status for this error: 2 for I/O failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
