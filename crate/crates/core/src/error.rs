use thiserror::Error;

/// Errors raised by the tensor, kernel and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("letter {letter} is outside the alphabet 1..={dim}")]
    InvalidWord { letter: usize, dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scalar part must be {expected}, found {found}")]
    ScalarPartError { expected: f64, found: f64 },

    #[error("velocity depth {depth} is below the state depth {required}")]
    DepthTooSmall { depth: usize, required: usize },

    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("interval [{s}, {t}] lies outside [{start}, {end}]")]
    OutOfRange {
        s: f64,
        t: f64,
        start: f64,
        end: f64,
    },

    #[error("grid does not refine the velocity breakpoints: {0}")]
    GridMismatch(String),

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
