use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Argument outside the domain of a function (logit(0), df < 1, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix (determinant {det:e})")]
    Singular { det: f64 },

    #[error("matrix is not positive semidefinite")]
    NotPsd,

    /// Malformed input data. `row` is 1-based over data rows; 0 means the header.
    #[error("input error at row {row}, column {column}: {message}")]
    Input {
        row: usize,
        column: String,
        message: String,
    },

    #[error("input error: {0}")]
    EmptyInput(String),

    #[error(
        "study {id}: zero cell after correction; choose a continuity correction policy (e.g. --correction-policy all)"
    )]
    ZeroCell { id: String },

    #[error("insufficient data: need at least {needed} studies, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("test error: {0}")]
    Test(String),
}
