use thiserror::Error;

/// Errors raised by constructors, analysis routines and the integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("fast weight b[{index}] = {value} is not positive")]
    SingularWeights { index: usize, value: f64 },
    #[error("eta family violates the sum rule at lambda = {lambda}: sum = {sum}")]
    InvalidEta { lambda: usize, sum: f64 },
    #[error("invalid outer method: {0}")]
    InvalidOuter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular Newton matrix")]
    SingularJacobian,
    #[error("non-finite value encountered at t = {t}")]
    Diverged { t: f64 },
    #[error("trajectory diverged for step size H = {h}")]
    DivergedAt { h: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown scheme '{0}'")]
    UnknownScheme(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code, used in CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Structural(_) => "Structural",
            Error::SingularWeights { .. } => "SingularWeights",
            Error::InvalidEta { .. } => "InvalidEta",
            Error::InvalidOuter(_) => "InvalidOuter",
            Error::Domain(_) => "Domain",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::SingularJacobian => "SingularJacobian",
            Error::Diverged { .. } => "Diverged",
            Error::DivergedAt { .. } => "Diverged",
            Error::Unsupported(_) => "Unsupported",
            Error::UnknownScheme(_) => "UnknownScheme",
            Error::UnknownProblem(_) => "UnknownProblem",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::Format(_) => "Format",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
