use thiserror::Error;

use crate::analytic::EtSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature ran out of subdivisions.
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    Convergence { estimate: f64, error_bound: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Exhaustive enumeration refused because the instance is too large.
    #[error("instance too large: {0}")]
    Size(String),

    /// The equal-throughput probabilities violate the feasibility conditions.
    /// The full solution (probabilities and violated conditions) is carried along.
    #[error("equal throughput is infeasible ({} violated condition(s))", .0.violations.len())]
    Infeasible(Box<EtSolution>),

    #[error("usage error: {0}")]
    Usage(String),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
