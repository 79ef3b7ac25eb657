use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("config: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] gpe_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    /// Runs that finished with a hard solver failure; outputs were written.
    #[error("{0} run(s) failed")]
    RunsFailed(usize),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
