use thiserror::Error;

use crate::symexpr::{ParseError, Sym};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("symbol `{0}` has no assigned value")]
    Unassigned(Sym),

    #[error("{function} is undefined at {argument:e}")]
    Domain { function: &'static str, argument: f64 },

    #[error("symbol `{symbol}` is out of range for dimension {dim}")]
    IndexOutOfRange { symbol: Sym, dim: usize },

    #[error("symbol `{symbol}` is not allowed in {context}")]
    ForbiddenSymbol { context: &'static str, symbol: Sym },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("spatial Jacobian is singular (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("inverse map does not invert the forward map (residual {residual:e})")]
    NotInverse { residual: f64 },

    #[error("velocity Hessian is singular (|det| = {det:e})")]
    SingularHessian { det: f64 },

    #[error("Lagrangian is not hyperregular: {0}")]
    NotHyperregular(String),

    #[error("time component of a vector field must be 0 or 1, got {0}")]
    InvalidTimeComponent(i64),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("cannot quantize: {0}")]
    Quantization(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("map is not monotone on the grid domain")]
    NonMonotone,

    #[error("linear solve failed (relative residual {residual:e})")]
    LinearSolve { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
