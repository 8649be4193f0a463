//! Error type shared across the crate.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between config parsing and checkpoint I/O.
///
/// Data-file problems are split into three variants on purpose: callers
/// (and the test suite) distinguish "wrong format" from "file too short"
/// from "images and labels disagree".
#[derive(Debug)]
pub enum Error {
    /// Tensor shapes that cannot be combined, with both shapes spelled out.
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
        context: &'static str,
    },
    /// A label outside [0, num_classes).
    InvalidLabel {
        label: usize,
        num_classes: usize,
    },
    /// A non-finite value where the contract requires finite ones.
    NonFinite {
        context: &'static str,
    },
    /// A configuration value outside its documented range.
    InvalidConfig(String),
    /// Unknown name looked up in a strategy registry (training mode, attack).
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: Vec<&'static str>,
    },
    /// A data file whose header or layout is not what the format requires.
    /// Always names the offending value.
    DataFormat(String),
    /// A data file shorter (or longer) than its header promises.
    DataLength {
        path: String,
        expected: usize,
        actual: usize,
    },
    /// Image and label files that do not describe the same number of samples.
    DataConsistency {
        images: usize,
        labels: usize,
    },
    /// Checkpoint file rejected (bad magic, version, or descriptor mismatch).
    Checkpoint(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                expected,
                actual,
                context,
            } => {
                write!(
                    f,
                    "{context}: shape mismatch, expected {expected:?} got {actual:?}"
                )
            }
            Error::InvalidLabel { label, num_classes } => {
                write!(f, "label {label} out of range for {num_classes} classes")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::UnknownStrategy { kind, name, known } => {
                write!(f, "unknown {kind} {name:?}, expected one of {known:?}")
            }
            Error::DataFormat(msg) => write!(f, "data format error: {msg}"),
            Error::DataLength {
                path,
                expected,
                actual,
            } => {
                write!(f, "{path}: expected {expected} bytes, found {actual}")
            }
            Error::DataConsistency { images, labels } => {
                write!(
                    f,
                    "image/label count mismatch: {images} images vs {labels} labels"
                )
            }
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
