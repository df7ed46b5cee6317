use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not orthogonal: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotOrthogonal { defect: f64, tol: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("site ({i},{j}) is outside the triangle of order {order}")]
    OutOfDomain { i: i64, j: i64, order: usize },

    #[error("index {index} is outside a lattice of {dim} sites")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("degenerate rotation: |{entry}| = {value:.3e} is below {threshold:.0e}")]
    DegenerateRotation {
        entry: &'static str,
        value: f64,
        threshold: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("bad range: {0}")]
    BadRange(String),

    #[error("bad config: {0}")]
    BadConfig(String),

    #[error("unknown command: {0}")]
    UnknownCommand(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code, used in the CLI error object.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotOrthogonal { .. } => "NotOrthogonal",
            Error::NonFinite(_) => "NonFinite",
            Error::OutOfDomain { .. } | Error::IndexOutOfRange { .. } => "OutOfDomain",
            Error::DegenerateRotation { .. } => "DegenerateRotation",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::BadRange(_) => "BadRange",
            Error::BadConfig(_) | Error::Json(_) => "BadConfig",
            Error::UnknownCommand(_) => "UnknownCommand",
            Error::VerificationFailed(_) => "VerificationFailed",
            Error::Io(_) | Error::Csv(_) => "Io",
        }
    }
}
