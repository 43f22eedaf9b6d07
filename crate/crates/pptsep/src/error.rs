use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by shape checks, numeric guards, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system shape: {0}")]
    InvalidShape(String),

    #[error("index out of bounds: {0}")]
    IndexOutOfBounds(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: asymmetry {residual:.3e} at ({row},{col}) exceeds tolerance {tol:.3e}")]
    NotHermitian {
        residual: f64,
        row: usize,
        col: usize,
        tol: f64,
    },

    #[error("matrix is not positive semidefinite: witness eigenvalue {eigenvalue:.6e}")]
    NotPsd { eigenvalue: f64 },

    #[error("operator is singular or ill-conditioned: lambda_min={lambda_min:.6e}, lambda_max={lambda_max:.6e}")]
    IllConditioned { lambda_min: f64, lambda_max: f64 },

    #[error("zero local vector for subsystem {subsystem}")]
    ZeroVector { subsystem: usize },

    #[error("trace {0:.6e} is too small to normalize")]
    TraceTooSmall(f64),

    #[error("rank condition unmet: rank {rank}, expected {expected}")]
    RankCondition { rank: usize, expected: usize },

    #[error("commuting-family residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    NotCommuting { residual: f64, tol: f64 },

    #[error("simultaneous diagonalization failed after {attempts} attempts; best residual {best_residual:.3e}")]
    SimDiagFailed { attempts: usize, best_residual: f64 },

    #[error("canonical-form violation: block ({b:?},{b_prime:?}) residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    BlockConsistency {
        b: Vec<usize>,
        b_prime: Vec<usize>,
        residual: f64,
        tol: f64,
    },

    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
