use thiserror::Error;

use crate::io::ArchiveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("target point map has no valid points")]
    EmptyTarget,

    #[error("not enough static structure: {static_points} static points after masking")]
    InsufficientStaticStructure { static_points: usize },

    #[error("invalid scene spec: `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error(transparent)]
    Archive(#[from] ArchiveError),
}

impl Error {
    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, printed by the CLI on failure.
    pub fn reason_code(&self) -> &'static str {
        match self {
            Error::InsufficientData { .. } => "insufficient-data",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Argument(_) => "argument",
            Error::Domain(_) => "domain",
            Error::EmptyTarget => "empty-target",
            Error::InsufficientStaticStructure { .. } => "insufficient-static-structure",
            Error::InvalidSpec { .. } => "invalid-spec",
            Error::Archive(_) => "archive",
        }
    }
}
