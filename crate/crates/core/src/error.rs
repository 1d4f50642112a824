use thiserror::Error;

use crate::polyring::VarId;

/// Broad failure classes, used by front ends to pick exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// A mathematical precondition was violated by the input.
    Domain,
    /// An iterative numerical method failed.
    Numeric,
    /// Malformed input data.
    Schema,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing values for variables: {}", join_vars(.0))]
    MissingVariables(Vec<VarId>),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parity mismatch: {0}")]
    Parity(String),

    #[error("polynomial is not multilinear in: {}", join_vars(.0))]
    NotMultilinear(Vec<VarId>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero vector is not allowed here")]
    ZeroVector,

    #[error("determinant must be 1, got {re}+{im}i")]
    Determinant { re: f64, im: f64 },

    #[error("determinant must be identically 1, got {0}")]
    PolyDeterminant(String),

    #[error("last rows differ by {mismatch:e} (tolerance {tol:e})")]
    LastRowMismatch { mismatch: f64, tol: f64 },

    #[error("symbolic expansion exceeded the term budget of {budget} terms")]
    TermBudget { budget: usize },

    #[error("shear fields do not share one residual polynomial")]
    MixedResiduals,

    #[error("stratum {stratum} is not supported for K = {k}: {reason}")]
    UnsupportedStratum { stratum: usize, k: usize, reason: String },

    #[error("entry is not a univariate polynomial in a single free symbol: {0}")]
    NotUnivariate(String),

    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("Jacobian is numerically rank deficient (singular value ratio {ratio:e})")]
    NearSingularJacobian { ratio: f64 },

    #[error("step size underflow while tracking on t in [{t0}, {t1}]")]
    StepUnderflow { t0: f64, t1: f64 },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoConvergence { .. }
            | Error::NearSingularJacobian { .. }
            | Error::StepUnderflow { .. }
            | Error::SingularMatrix => ErrorClass::Numeric,
            Error::Parse(_) => ErrorClass::Schema,
            _ => ErrorClass::Domain,
        }
    }
}

fn join_vars(vars: &[VarId]) -> String {
    vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;
