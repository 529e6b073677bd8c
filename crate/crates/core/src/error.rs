//! Error types shared across the crate.
//!
//! Every error carries a stable machine-parsable category (see
//! [`Error::category`]) which the CLI prints on failure.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed text input (TSV triples, config files).
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Binary container violations: bad magic, version, or truncation.
    #[error("format error: {0}")]
    Format(String),

    /// A node/relation id outside the graph's vocabulary.
    #[error("index error: {0}")]
    Index(String),

    /// Tensor shape mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Non-finite values produced or ingested.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Inconsistent configuration (dims, feature flags, fingerprints).
    #[error("config error: {0}")]
    Config(String),

    /// Evaluation protocol violation (e.g. a candidate present in the graph).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// Negative sampling ran out of valid corruptions.
    #[error("exhaustion error: {0}")]
    Exhausted(String),

    /// Degenerate input (empty list where at least one element is required).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable lowercase category tag, one per variant.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Index(_) => "index",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Protocol(_) => "protocol",
            Error::Exhausted(_) => "exhausted",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_are_stable() {
        assert_eq!(Error::Shape("x".into()).category(), "shape");
        assert_eq!(
            Error::Parse {
                path: "f".into(),
                line: 3,
                msg: "bad".into()
            }
            .category(),
            "parse"
        );
        assert_eq!(Error::Exhausted("t".into()).category(), "exhausted");
    }
}
