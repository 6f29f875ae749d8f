use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("invalid grid: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("conditions not satisfied: ||H^T M||_F = {norm:.6e} (must be < 1)")]
    ConditionsNotSatisfied { norm: f64 },

    #[error("load flow did not converge after {iterations} iterations (last update {last_delta:.3e})")]
    NonConvergence { iterations: usize, last_delta: f64 },

    #[error("voltage collapse at bus {bus} (v = {v:.3e})")]
    VoltageCollapse { bus: usize, v: f64 },

    #[error("recovery diverged at iteration {iteration} (||df|| = {norm:.3e}); the exactness conditions are probably not met")]
    RecoveryDiverged { iteration: usize, norm: f64 },

    #[error("recovery did not converge within {iterations} iterations")]
    RecoveryNotConverged { iterations: usize },

    #[error("solver: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
