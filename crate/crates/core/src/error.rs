use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("mesh generation failed: {0}")]
    Mesh(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("Newton iteration diverged: {0}")]
    Divergence(String),
    #[error("eigenvalue iteration failed: {0}")]
    Eigen(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
