use std::fmt;
use std::io;

use thiserror::Error;

/// A payload field that is missing, mistyped or unexpected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    pub(crate) fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SchemaError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for SchemaError {}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame of {0} bytes exceeds the 16 MiB limit")]
    Oversize(usize),
    #[error("truncated frame: needed {needed} bytes, got {available}")]
    Truncated { needed: usize, available: usize },
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("schema violation in {kind}: {source}")]
    Schema {
        kind: &'static str,
        #[source]
        source: SchemaError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl WireError {
    /// Short code used in `ProtocolError` replies.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::Oversize(_) => "Oversize",
            WireError::Truncated { .. } => "Truncated",
            WireError::MalformedJson(_) => "MalformedJson",
            WireError::UnknownType(_) => "UnknownType",
            WireError::Schema { .. } => "SchemaError",
            WireError::Io(_) => "Io",
        }
    }
}
