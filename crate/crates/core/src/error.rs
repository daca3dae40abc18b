use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("tensor factor {factor}: {reason}")]
    Factor { factor: usize, reason: String },

    #[error("operator is not Hermitian (max deviation {deviation:.3e}, allowed {allowed:.3e})")]
    NotHermitian { deviation: f64, allowed: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("malformed field `{field}`: {reason}")]
    Format { field: String, reason: String },

    #[error("no sign change of the verdict found in {0}")]
    NoSignChange(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
