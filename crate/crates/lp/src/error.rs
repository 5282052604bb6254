use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("LP file parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
