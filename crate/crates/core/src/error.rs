use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size {h} exceeds the limit {limit}")]
    StepTooLarge { h: f64, limit: f64 },

    #[error("numerical failure at t = {time}: {what} (residual {residual:e})")]
    NumericalFailure {
        what: String,
        time: f64,
        residual: f64,
    },

    #[error("truncation overflow at t = {time}: boundary mass {boundary_mass:e} exceeds {threshold:e}")]
    TruncationOverflow {
        time: f64,
        boundary_mass: f64,
        threshold: f64,
    },

    #[error("support of {atoms} atoms exceeds the exact-transport capacity {capacity}")]
    Capacity { atoms: usize, capacity: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Re-stamps a numerical failure with the simulation time at which it surfaced.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::NumericalFailure { what, residual, .. } => Error::NumericalFailure {
                what,
                time: t,
                residual,
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
