use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator maps basis state {0:#x} outside the basis")]
    LeavesBasis(u64),

    #[error("eigensolver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time step underflow in Krylov propagation (step {step:.3e})")]
    StepUnderflow { step: f64 },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("no QSE solution for momentum {k_int} with conjugation {c}")]
    MissingMomentum { k_int: i64, c: i32 },

    #[error("zero-norm state: {0}")]
    ZeroNorm(&'static str),

    #[error("Pauli strings {0} and {1} do not commute")]
    NonCommuting(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
