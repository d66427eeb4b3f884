//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by dataset loading, preprocessing, model training and
/// detection.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV or JSON input could not be parsed. `line` is 1-based and counts
    /// the header, so the first data row is line 2.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An input violated a structural requirement (ordering, dimensions,
    /// value ranges, ...).
    #[error("invalid input: {0}")]
    Validation(String),

    /// Forward filling could not resolve a missing value because the very
    /// first observation of the feature is already missing.
    #[error("feature '{feature}' has no observed value before the first gap")]
    Imputation { feature: String },

    /// Every feature of a table was constant, so nothing remains to model.
    #[error("all features are constant over the fitted range; nothing to model")]
    NoInformativeFeatures,

    /// Two objects that must agree on a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: String,
    },

    /// Training diverged (non-finite loss or gradient).
    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// A configuration value was out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Filesystem-level failure, annotated with the path involved.
    #[error("io error on '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Convenience constructor used by the loaders.
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Convenience constructor for I/O failures.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
