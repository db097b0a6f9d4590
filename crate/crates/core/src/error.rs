use thiserror::Error;

/// Errors produced by the fitting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// The minimal sample does not determine a unique model.
    #[error("degenerate minimal sample set")]
    DegenerateMss,
    /// Wrong number of points or wrong point dimension for the model kind.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    /// Fewer residuals than the inlier/outlier boundary scan requires.
    #[error("dataset too small: need at least {needed} points, got {got}")]
    DatasetTooSmall { needed: usize, got: usize },
    #[error("objective became non-finite during the box QP solve")]
    NonFiniteObjective,
    #[error("ground-truth labels are required")]
    MissingGroundTruth,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("diagnostic not available: {0}")]
    UnavailableDiagnostic(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
