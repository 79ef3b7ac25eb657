//! Report types and their CSV / JSON serializations.
//!
//! Observable traces always carry the columns
//! `t, mass, energy, pseudo_energy, err_l2, err_h1, err_l1rho, wall_s`;
//! absent values are empty fields.

use std::fs;
use std::path::Path;

use gpe_core::observables::ObservableSample;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Row {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub pseudo_energy: Option<f64>,
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub err_l1rho: Option<f64>,
    pub wall_s: f64,
}

impl From<&ObservableSample> for Row {
    fn from(s: &ObservableSample) -> Self {
        Row {
            t: s.t,
            mass: s.mass,
            energy: s.energy,
            pseudo_energy: s.pseudo_energy,
            err_l2: s.errors.map(|e| e.l2),
            err_h1: s.errors.map(|e| e.h1),
            err_l1rho: s.errors.map(|e| e.l1_density),
            wall_s: s.wall_s,
        }
    }
}

/// Summary of one evolution (averaged over timing repeats).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub tau: f64,
    pub n_steps: usize,
    pub nx: usize,
    pub ny: usize,
    pub unknowns: usize,
    pub steps_taken: usize,
    pub final_t: f64,
    pub final_mass: f64,
    pub final_energy: f64,
    pub err_l2: Option<f64>,
    pub err_h1: Option<f64>,
    pub err_l1rho: Option<f64>,
    pub blow_up_time: Option<f64>,
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub linear_solves: usize,
    pub linear_iterations: usize,
    pub repeats: usize,
    /// Mean over repeats of the stepping time only.
    pub mean_step_wall_s: f64,
    pub mean_wall_s: f64,
    pub failure: Option<String>,
}

/// One cell of a convergence sweep.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EocRow {
    pub method: String,
    /// `h / tau` of coupled sweeps.
    pub ratio: Option<f64>,
    pub tau: f64,
    pub n_steps: usize,
    pub nx: usize,
    pub ny: usize,
    pub err_l2: f64,
    pub err_h1: Option<f64>,
    pub err_l1rho: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_h1: Option<f64>,
    pub eoc_l1rho: Option<f64>,
    pub blow_up_time: Option<f64>,
    pub wall_s: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StabilityRow {
    pub method: String,
    pub tau: f64,
    pub n_steps: usize,
    pub threshold: f64,
    /// First time with `E > threshold`, or `none`.
    pub crossing: String,
    pub initial_energy: f64,
    pub max_energy: f64,
    pub steps_taken: usize,
    pub wall_s: f64,
    pub failure: Option<String>,
}

impl StabilityRow {
    pub fn crossing_time(&self) -> Option<f64> {
        self.crossing.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GroundStateRecord {
    pub eigenvalue: f64,
    pub energy: f64,
    pub mass: f64,
    pub iterations: usize,
    pub residual: f64,
    pub eigen_residual: f64,
    pub vortices: Option<usize>,
    pub flow_step: f64,
    pub state_file: String,
    pub wall_s: f64,
}

/// Everything a subcommand produced, with the fully resolved config.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub seed: Option<u64>,
    pub runs: Vec<RunRecord>,
    pub eoc: Vec<EocRow>,
    pub stability: Vec<StabilityRow>,
    pub ground_state: Option<GroundStateRecord>,
    pub wall_s: f64,
    pub failed_runs: usize,
}

impl Report {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            command: command.into(),
            config,
            seed: None,
            runs: vec![],
            eoc: vec![],
            stability: vec![],
            ground_state: None,
            wall_s: 0.0,
            failed_runs: 0,
        }
    }

    pub fn ok(&self) -> bool {
        self.failed_runs == 0
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<R: Serialize>(path: &Path, value: &R) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::BenchError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observable_columns_are_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.csv");
        write_csv(&p, &[Row { t: 0.5, mass: 4.0, energy: -1.0 / 3.0, err_l2: Some(1e-3), ..Default::default() }]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,mass,energy,pseudo_energy,err_l2,err_h1,err_l1rho,wall_s");
        assert_eq!(lines.next().unwrap(), "0.5,4.0,-0.3333333333333333,,0.001,,,0.0");
    }

    #[test]
    fn crossing_parses() {
        let mut r = StabilityRow { crossing: "none".into(), ..Default::default() };
        assert_eq!(r.crossing_time(), None);
        r.crossing = "12.5".into();
        assert_eq!(r.crossing_time(), Some(12.5));
    }
}
