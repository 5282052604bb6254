use codesign_lp::LpError;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("data row {row}: {message}")]
    Data { row: usize, message: String },
    #[error("grid limit exceeded at step {step}: |net| = {net} kW > {limit} kW")]
    GridLimit { step: usize, net: f64, limit: f64 },
    #[error("{scenario}: solver stopped with status {status}")]
    Solver { scenario: String, status: String },
    #[error("{scenario}: solution violates {constraint} at step {step} by {amount:e}")]
    Verification { scenario: String, constraint: String, step: usize, amount: f64 },
    #[error("training diverged at iteration {iteration}: mean return {mean_return} below guard {guard}")]
    Diverged { iteration: usize, mean_return: f64, guard: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
