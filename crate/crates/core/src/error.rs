use thiserror::Error;

/// Errors raised anywhere in the rendering and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("validation error at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("source or receiver outside room `{room}`")]
    OutsideRoom { room: String },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("insufficient decay: {0}")]
    InsufficientDecay(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable category, used by the CLI for single-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Unknown { .. } => "unknown",
            Error::Infeasible(_) => "infeasible",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::OutsideRoom { .. } => "outside-room",
            Error::RateMismatch(..) => "rate-mismatch",
            Error::InsufficientDecay(_) => "insufficient-decay",
            Error::InvalidInput(_) => "invalid-input",
            Error::Io(_) => "io",
            Error::Wav(_) => "wav",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
