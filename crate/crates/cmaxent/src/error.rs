//! Error type shared by all solvers and I/O paths.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample set is empty")]
    EmptySamples,

    #[error("all rows carry the same label; class frequency would be {q}")]
    SingleClass { q: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("moment spec rejected: {0}")]
    InvalidSpec(String),

    #[error("infeasible constraints: {reason}")]
    Infeasible { reason: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("quadrature order {order} insufficient (estimated error {error:.3e})")]
    QuadratureAccuracy { order: usize, error: f64 },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("degenerate decision boundary: zero normal vector")]
    DegenerateBoundary,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = data/parse error, 3 = infeasibility or non-convergence,
    /// 64 = usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptySamples
            | Error::SingleClass { .. }
            | Error::NonFinite { .. }
            | Error::InvalidSpec(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Infeasible { .. }
            | Error::NonConvergence { .. }
            | Error::QuadratureAccuracy { .. }
            | Error::Singular { .. }
            | Error::DegenerateBoundary => 3,
            Error::InvalidArgument(_) => 64,
        }
    }
}
