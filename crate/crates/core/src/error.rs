use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("offset rejected: {0}")]
    Offset(String),

    #[error("window exhausted: {0}")]
    WindowExhausted(String),

    #[error("zero mode: min |eigenvalue| = {min_abs:.3e} is below zero_tol = {tol:.1e}")]
    ZeroMode { min_abs: f64, tol: f64 },

    #[error("not invertible at tolerance: gap {gap:.3e} < floor {floor:.1e}")]
    NotInvertible { gap: f64, floor: f64 },

    #[error("symmetry violation: {0}")]
    Symmetry(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("reference mismatch: {0}")]
    ReferenceMismatch(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Stable kebab-case name of the variant, for tables and exit reports.
    pub fn class(&self) -> &'static str {
        match self {
            LabError::InvalidArgument(_) => "invalid-argument",
            LabError::Dimension(_) => "dimension",
            LabError::Offset(_) => "offset",
            LabError::WindowExhausted(_) => "window-exhausted",
            LabError::ZeroMode { .. } => "zero-mode",
            LabError::NotInvertible { .. } => "not-invertible",
            LabError::Symmetry(_) => "symmetry",
            LabError::Structure(_) => "structure",
            LabError::ReferenceMismatch(_) => "reference-mismatch",
            LabError::Budget(_) => "budget",
            LabError::Linalg(_) => "linalg",
            LabError::Io(_) => "io",
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for LabError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        LabError::Linalg(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(std::io::Error::other(e))
    }
}
