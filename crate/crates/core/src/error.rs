use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate flow map: {0}")]
    DegenerateMap(String),

    #[error("elliptic solver failed after {iterations} iterations (relative residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("pressure coefficient matrix not positive definite at node ({i}, {j})")]
    NonPositiveCoefficients { i: usize, j: usize },

    #[error("vacuum amplitude law degenerate: {0}")]
    VacuumDegeneracy(String),

    #[error("a priori window violated at t = {t}: {reason}")]
    WindowViolation { t: f64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
