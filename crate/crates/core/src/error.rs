use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("size error: requested {requested}, available {available}")]
    Size { requested: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operation requires a {expected} complex")]
    Kind { expected: &'static str },

    #[error("complex is not closed: {0}")]
    Closure(String),

    #[error("unsupported dimension k = {0}")]
    UnsupportedDimension(usize),

    #[error("cell {index} at level {level} has no coface and strict weighting is on")]
    IsolatedCell { level: usize, index: usize },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    Convergence {
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("betti number is ambiguous; candidates {candidates:?}")]
    AmbiguousBetti { candidates: Vec<usize> },

    #[error("cochain column {0} is identically zero")]
    DegenerateColumn(usize),

    #[error("no loop found for class {class}")]
    NoLoop { class: usize },

    #[error("partition inconsistency: {0}")]
    Partition(String),

    #[error("eigengap is zero; bound undefined")]
    ZeroEigengap,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
