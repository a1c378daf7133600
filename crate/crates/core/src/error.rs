use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The stability hypothesis on (β, γ) fails.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("linear solver did not converge after {iterations} iterations (residual ratio {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("non-finite value in field `{field}` at t = {t}")]
    NonFinite { field: &'static str, t: f64 },

    #[error("envelope breakdown: {0}")]
    EnvelopeBreakdown(String),

    #[error("threshold search infeasible: {0}")]
    Infeasible(String),

    #[error("decay fit undefined: {0}")]
    DecayFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Numerical aborts raised by the stepper, as opposed to bad inputs.
    pub fn is_numerical_abort(&self) -> bool {
        matches!(self, Error::SolverDiverged { .. } | Error::NonFinite { .. })
    }
}
