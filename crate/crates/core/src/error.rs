use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("zero diagonal entry at row {0}")]
    ZeroDiagonal(usize),

    #[error("singular diagonal block {0}")]
    SingularBlock(usize),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("variable {0} has no admissible interpolation candidates")]
    IsolatedVariable(usize),

    #[error("fine variable {0} has an empty interpolatory set")]
    EmptyInterpolation(usize),

    #[error("empty least angle regression path")]
    EmptyPath,

    #[error("coarsening stagnated at level {level} (n = {n})")]
    CoarseningStagnation { level: usize, n: usize },

    #[error("hierarchy needs at least {0} levels")]
    TooFewLevels(usize),

    #[error("operator is not positive definite along search direction (p^T A p = {0:e})")]
    Indefinite(f64),

    #[error("Galerkin product asymmetry {asym:e} exceeds tolerance {tol:e}")]
    Asymmetric { asym: f64, tol: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
