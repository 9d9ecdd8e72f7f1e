use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed problem: {0}")]
    MalformedSpec(String),

    #[error("adaptive quadrature did not reach tolerance {tol:e} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tol: f64 },

    #[error("parameter {param} lies outside the open domain ({lo}, {hi}) with margin")]
    OutOfDomain { param: f64, lo: f64, hi: f64 },

    #[error("atoms {0} and {1} share a parameter; merge them first")]
    DuplicateAtoms(usize, usize),

    #[error("query point {0} coincides with a jump location")]
    JumpPointQuery(f64),

    #[error("atom {index} is not saturated by the certificate (correlation {correlation})")]
    NonSaturatedAtoms { index: usize, correlation: f64 },

    #[error("no reliable kernel direction (residual {residual:e})")]
    NumericalRankAmbiguity { residual: f64 },

    #[error("grid problem is infeasible (phase-one residual {0:e})")]
    Infeasible(f64),

    #[error("exact oracle limited to N <= 20 and m <= 4096 (got N = {n}, m = {m})")]
    ScaleGuard { n: usize, m: usize },

    #[error("grid must have at least 2 nodes (got {0})")]
    GridTooSmall(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
