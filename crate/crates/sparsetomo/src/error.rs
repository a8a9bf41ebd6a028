use thiserror::Error;

/// Errors produced by system construction, reduction and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell index {index} out of range (n = {n})")]
    CellIndexOutOfRange { index: usize, n: usize },

    #[error("ray index {index} out of range (m = {m})")]
    RayIndexOutOfRange { index: usize, m: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid perturbation interval ({low}, {high}): need 0 < low < high")]
    InvalidPerturbation { low: f64, high: f64 },

    #[error("system is already perturbed; expected unit weights")]
    AlreadyPerturbed,

    #[error("measurement vector has negative entry {value} at ray {index}")]
    NegativeMeasurement { index: usize, value: f64 },

    #[error("negative solution component {value} at position {index}")]
    NegativeComponent { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty matrix")]
    EmptyMatrix,

    #[error("empty cell set")]
    EmptyCellSet,

    #[error("invalid sparsity: {0}")]
    InvalidSparsity(String),

    #[error("criterion not attained: no sign change of N_R - c*N_C on [{lo}, {hi}]")]
    CriterionNotAttained { lo: f64, hi: f64 },

    #[error("tail bound undefined for k = 0")]
    TailBoundUndefined,

    #[error("instance too large for exact enumeration: n = {n} > {limit}")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("invalid matrix data: {0}")]
    InvalidMatrix(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
