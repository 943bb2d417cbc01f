use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("atomic level {0} out of range (levels are 1, 2, 3)")]
    LevelOutOfRange(usize),

    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("steady state is not unique or the system is singular: {0}")]
    SingularSystem(String),

    #[error("Fock cutoff not converged below ceiling {ceiling}")]
    CutoffNotConverged { ceiling: usize },

    #[error("only {found} peaks inside the window, need at least 3")]
    InsufficientPeaks { found: usize },

    #[error("malformed spectrum: {0}")]
    MalformedSpectrum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
