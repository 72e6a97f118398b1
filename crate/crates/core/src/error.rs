use thiserror::Error;

use crate::smdp::Violation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("numerical failure at {point:?}: {reason}")]
    NumericalFailure { point: Vec<f64>, reason: String },

    /// Follower Hessian in the free coordinates is singular or too badly
    /// conditioned for the implicit hypergradient.
    #[error("singular follower Hessian at theta={theta:?}, omega={omega:?} (condition number {condition:e})")]
    SingularHessian {
        theta: Vec<f64>,
        omega: Vec<f64>,
        condition: f64,
    },

    #[error("follower solve did not converge at theta={theta:?}: residual {residual:e} after {iterations} iterations")]
    NotConverged {
        theta: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid MDP{}: {}", leader_action.map(|a| format!(" for leader action {a}")).unwrap_or_default(), violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMdp {
        leader_action: Option<usize>,
        violations: Vec<Violation>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
