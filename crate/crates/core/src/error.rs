use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (max |M - M^H| = {asymmetry:e}, scale {scale:e})")]
    NotHermitian { asymmetry: f64, scale: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: String, found: String },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("process input states do not span the operator space (rank {rank} < {needed})")]
    SingularInputBasis { rank: usize, needed: usize },

    #[error("invalid ladder: {0}")]
    InvalidChain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
