//! Benchmark driver for the Gross–Pitaevskii integrators: TOML run
//! configurations, single runs, convergence sweeps, stability studies and
//! ground-state solves, with CSV and JSON reports.

pub mod config;
pub mod error;
pub mod output;
pub mod runs;

pub use config::{Method, RunConfig};
pub use error::{BenchError, Result};
pub use output::{EocRow, GroundStateRecord, Report, RunRecord, Row, StabilityRow};
pub use runs::{cmd_converge, cmd_groundstate, cmd_run, cmd_stability, Context};
