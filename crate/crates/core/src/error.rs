use thiserror::Error;

/// Failures raised by the constraint machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("no solution: residual {residual:.3e}")]
    NoSolution { residual: f64 },
    #[error("degenerate system: {0}")]
    Degenerate(String),
    #[error("reseed required: rank {rank}, expected {expected}")]
    ReseedRequired { rank: usize, expected: usize },
    #[error("point off the constraint surface: constraint {index} has residual {residual:.3e}")]
    OffSurface { index: usize, residual: f64 },
    #[error("projection did not converge: residual {residual:.3e}")]
    NonConvergence { residual: f64 },
    #[error("check {name} failed: residual {residual:.3e}")]
    CheckFailed { name: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
