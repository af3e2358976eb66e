use thiserror::Error;

/// Errors raised by grid, design and solver operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("coordinate {value} of factor {factor} is not a level of that factor")]
    OffGrid { factor: usize, value: f64 },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("information matrix is singular")]
    Singular,

    #[error("matrix is indefinite beyond tolerance (min eigenvalue {min_eigenvalue:e})")]
    Indefinite { min_eigenvalue: f64 },

    #[error("regression vectors of the exploration set are degenerate (rank < m)")]
    Degenerate,

    #[error("model evaluation failed: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
