use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("relaxation order {order} too small for degree {degree}")]
    OrderTooSmall { order: u32, degree: u32 },

    #[error("degree {degree} exceeds the available degree {limit}")]
    DegreeOverflow { degree: u32, limit: u32 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("relaxation is infeasible at this order")]
    RelaxationInfeasible,

    #[error("relaxation is unbounded at this order")]
    RelaxationUnbounded,

    #[error("numerical trouble in the conic solver: {0}")]
    NumericalTrouble(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
