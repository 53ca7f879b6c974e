use thiserror::Error;

/// Errors produced anywhere in the simulation, training and diagnosis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sample index {index} out of range for trace of {len} samples")]
    OutOfRange { index: i64, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("window covers {0} reflections; at most two are allowed")]
    TooManyReflections(usize),

    #[error("augmentation target {target} does not match a window with {found} reflection(s)")]
    ClassMismatch { target: String, found: usize },

    #[error("class {0} has too few samples: {1}")]
    InsufficientClass(String, usize),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("reference mismatch: {0}")]
    ReferenceMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used by the CLI for one-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTopology(_) => "invalid_topology",
            Error::InvalidConfig(_) => "invalid_config",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Shape(_) => "shape",
            Error::TooManyReflections(_) => "too_many_reflections",
            Error::ClassMismatch { .. } => "class_mismatch",
            Error::InsufficientClass(..) => "insufficient_class",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::ReferenceMismatch(_) => "reference_mismatch",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
