use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("linear solver did not reach tolerance: relative residual {residual:e} after {iterations} iterations")]
    LinearSolveFailed { residual: f64, iterations: usize },

    #[error("Newton iteration failed after {iterations} iterations: relative residual {residual:e}")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ground state iteration did not converge after {iterations} iterations (update {update:e})")]
    GroundStateNotConverged { iterations: usize, update: f64 },

    #[error("state file: {0}")]
    StateFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
