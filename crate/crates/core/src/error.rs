use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exponent p = {exponent} is not subcritical in dimension {dim}")]
    Supercritical { dim: usize, exponent: f64 },

    #[error("no initial bracket for the shooting parameter (N = {dim}, p = {exponent})")]
    NoBracket { dim: usize, exponent: f64 },

    #[error("point {point:?} lies outside the domain")]
    OutsideDomain { point: Vec<f64> },

    #[error("coefficient {which} = {value} is not positive at {point:?}")]
    NonpositiveCoefficient {
        which: &'static str,
        point: Vec<f64>,
        value: f64,
    },

    #[error("unsupported domain: {0}")]
    UnsupportedShape(String),

    #[error("spike length scale {length_scale:.4e} is below 3 grid spacings ({spacing:.4e})")]
    Unresolved { length_scale: f64, spacing: f64 },

    #[error("tangent basis is degenerate (Gram condition number {condition:.3e})")]
    DegenerateBasis { condition: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("iterate left the domain at {point:?}")]
    BoundaryEscape { point: Vec<f64> },

    #[error("iterate collapsed to the trivial branch (height {height:.3e}, reference {reference:.3e})")]
    CollapseToZero {
        height: f64,
        reference: f64,
        solution: Box<crate::solver::SpikeSolution>,
    },

    #[error("field has no positive maximum")]
    FlatField,

    #[error("inverse iteration stalled after {iterations} iterations")]
    IterationStall { iterations: usize },

    #[error("converged solution has negative values (min {min:.3e})")]
    NegativeSolution { min: f64 },

    #[error("at ε = {eps}: {source}")]
    AtEpsilon { eps: f64, source: Box<Error> },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub type Result<T> = std::result::Result<T, Error>;
