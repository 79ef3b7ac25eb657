//! Run configuration: a TOML file with nested sections, overridable from
//! the command line, resolved against the problem catalog.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gpe_core::linalg::{SolverMethod, SolverOptions};
use gpe_core::problems::{problem, GroundStateOptions, InitialState, Potential, Profile, ProblemSpec};
use gpe_core::steppers::{NewtonOptions, ReInit, SchemeId};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// A time integrator: one of the finite element schemes or the spectral
/// splitting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fem(SchemeId),
    Sp2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fem(s) => s.name(),
            Method::Sp2 => "SP2",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = gpe_core::Error;

    fn from_str(s: &str) -> gpe_core::Result<Self> {
        if s.trim().eq_ignore_ascii_case("sp2") {
            return Ok(Method::Sp2);
        }
        s.parse().map(Method::Fem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// `auto`, `direct` or `iterative`
    pub method: String,
    pub direct_tol: f64,
    pub iterative_tol: f64,
    pub max_iter: Option<usize>,
    pub direct_flop_budget: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            method: "auto".into(),
            direct_tol: d.direct_tol,
            iterative_tol: d.iterative_tol,
            max_iter: d.max_iter,
            direct_flop_budget: d.direct_flop_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    pub damping: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let d = NewtonOptions::default();
        Self { rtol: d.rtol, atol: d.atol, max_iter: d.max_iter, damping: d.damping }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateConfig {
    /// Pseudo-time step; the problem's recommended value when absent.
    pub tau: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub stages: usize,
    pub stage_tol: f64,
    /// Fraction of the peak density below which phase windings are ignored.
    pub vortex_density_fraction: f64,
    /// Replace the problem's stationary potential, e.g. `harmonic`.
    pub potential: Option<String>,
    pub potential_params: Vec<f64>,
    pub beta: Option<f64>,
    pub omega: Option<f64>,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        let d = GroundStateOptions::default();
        Self {
            tau: None,
            tol: d.tol,
            max_iter: d.max_iter,
            stages: d.stages,
            stage_tol: d.stage_tol,
            vortex_density_fraction: 0.05,
            potential: None,
            potential_params: vec![],
            beta: None,
            omega: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Step counts of the sweep; each gives `tau = T / n`.
    pub steps: Vec<usize>,
    /// Alternatively, step sizes; `T / tau` must be an integer.
    pub taus: Vec<f64>,
    /// Optional element counts per cell, one entry per row of the sweep.
    pub elements: Vec<Vec<usize>>,
    /// Couple the mesh to the step: `h = ratio * tau` for each ratio.
    pub h_over_tau: Vec<f64>,
    /// `exact`, `fine` (same scheme, `reference_steps`) or `auto`.
    pub reference: String,
    pub reference_steps: Option<usize>,
    /// Scheme of the fine reference run; the swept scheme when absent.
    pub reference_scheme: Option<String>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            steps: vec![],
            taus: vec![],
            elements: vec![],
            h_over_tau: vec![],
            reference: "auto".into(),
            reference_steps: None,
            reference_scheme: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub steps: Vec<usize>,
    pub taus: Vec<f64>,
    /// Crossing criterion `E > threshold`, or `E > threshold * |E0|` when
    /// `relative` is set.
    pub energy_threshold: f64,
    pub relative: bool,
    /// Stop a run at its first crossing.
    pub stop_at_crossing: bool,
    /// Grid points of the spectral method.
    pub sp2_points: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self { steps: vec![], taus: vec![], energy_threshold: 0.0, relative: false, stop_at_crossing: true, sp2_points: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    /// Method of a single run.
    pub scheme: String,
    /// Methods of sweeps and stability studies; `[scheme]` when empty.
    pub schemes: Vec<String>,
    /// `desk` or `paper`
    pub profile: String,
    /// Element counts per direction; the profile default when absent.
    pub elements: Option<Vec<usize>>,
    /// `[a, b]` or `[ax, bx, ay, by]`; replaces the problem's domain.
    pub domain: Option<Vec<f64>>,
    pub tau: Option<f64>,
    pub n_steps: Option<usize>,
    pub final_time: Option<f64>,
    /// Observables every `stride` steps (and at the end).
    pub stride: usize,
    /// Timing repeats; reported wall times are averages.
    pub repeats: usize,
    /// `simple`, `half-step` or `centered`
    pub re_init: String,
    /// Blow-up when `|E| > energy_ceiling * |E0|`.
    pub energy_ceiling: f64,
    /// Initial state file; overrides the problem's initial data.
    pub initial_state: Option<PathBuf>,
    /// Directory of cached ground states; the output directory when absent.
    pub state_cache: Option<PathBuf>,
    pub solver: SolverConfig,
    pub newton: NewtonConfig,
    pub groundstate: GroundStateConfig,
    pub converge: ConvergeConfig,
    pub stability: StabilityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: String::new(),
            scheme: "RE".into(),
            schemes: vec![],
            profile: "desk".into(),
            elements: None,
            domain: None,
            tau: None,
            n_steps: None,
            final_time: None,
            stride: 1,
            repeats: 5,
            re_init: "simple".into(),
            energy_ceiling: 1e6,
            initial_state: None,
            state_cache: None,
            solver: SolverConfig::default(),
            newton: NewtonConfig::default(),
            groundstate: GroundStateConfig::default(),
            converge: ConvergeConfig::default(),
            stability: StabilityConfig::default(),
        }
    }
}

fn field(name: &str, msg: impl Into<String>) -> BenchError {
    BenchError::Config { field: name.to_string(), msg: msg.into() }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            BenchError::Parse(m) => BenchError::Parse(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn profile(&self) -> Result<Profile> {
        self.profile.parse().map_err(|_| field("profile", format!("expected `desk` or `paper`, got `{}`", self.profile)))
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        if self.problem.is_empty() {
            return Err(field("problem", "missing"));
        }
        let mut spec = problem(&self.problem, self.profile()?).map_err(|e| field("problem", e.to_string()))?;
        if let Some(d) = &self.domain {
            match (spec.dim, d.as_slice()) {
                (1, &[a, b]) => {
                    spec.lower[0] = a;
                    spec.upper[0] = b;
                }
                (2, &[ax, bx, ay, by]) => {
                    spec.lower = [ax, ay];
                    spec.upper = [bx, by];
                }
                _ => return Err(field("domain", format!("expected {} bounds, got {d:?}", 2 * spec.dim))),
            }
        }
        let g = &self.groundstate;
        if g.potential.is_some() || g.beta.is_some() || g.omega.is_some() {
            let (mut pot, mut beta, mut omega) = match &spec.initial {
                InitialState::GroundState { potential, beta, omega } => (potential.clone(), *beta, *omega),
                InitialState::Exact => (spec.potential.clone(), spec.beta, 0.0),
            };
            if let Some(name) = &g.potential {
                pot = Potential::from_name(name, &g.potential_params).map_err(|e| field("groundstate.potential", e.to_string()))?;
            }
            beta = g.beta.unwrap_or(beta);
            omega = g.omega.unwrap_or(omega);
            spec.initial = InitialState::GroundState { potential: pot, beta, omega };
            spec.exact = None;
        }
        spec.validate().map_err(|e| field("problem", e.to_string()))?;
        Ok(spec)
    }

    pub fn method(&self) -> Result<Method> {
        self.scheme.parse().map_err(|e: gpe_core::Error| field("scheme", e.to_string()))
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        if self.schemes.is_empty() {
            return Ok(vec![self.method()?]);
        }
        self.schemes
            .iter()
            .enumerate()
            .map(|(i, s)| s.parse().map_err(|e: gpe_core::Error| field(&format!("schemes[{i}]"), e.to_string())))
            .collect()
    }

    pub fn re_init(&self) -> Result<ReInit> {
        self.re_init.parse().map_err(|e: gpe_core::Error| field("re_init", e.to_string()))
    }

    pub fn final_time(&self, spec: &ProblemSpec) -> Result<f64> {
        let t = self.final_time.unwrap_or(spec.final_time);
        if !(t >= 0.0) || !t.is_finite() {
            return Err(field("final_time", format!("must be finite and nonnegative, got {t}")));
        }
        Ok(t)
    }

    /// `(tau, n_steps)` with `tau * n_steps = T` to 1e-12.
    pub fn time_grid(&self, spec: &ProblemSpec) -> Result<(f64, usize)> {
        let t = self.final_time(spec)?;
        resolve_steps(t, self.tau, self.n_steps.or(if self.tau.is_none() { Some(spec.n_steps) } else { None }), "tau")
    }

    pub fn elements(&self, spec: &ProblemSpec) -> Result<[usize; 2]> {
        match &self.elements {
            None => Ok(spec.elements),
            Some(e) => elements_from(e, spec.dim, "elements"),
        }
    }

    pub fn solver(&self) -> Result<SolverOptions> {
        let method = match self.solver.method.to_ascii_lowercase().as_str() {
            "auto" => SolverMethod::Auto,
            "direct" => SolverMethod::Direct,
            "iterative" => SolverMethod::Iterative,
            m => return Err(field("solver.method", format!("expected auto, direct or iterative, got `{m}`"))),
        };
        Ok(SolverOptions {
            method,
            direct_tol: self.solver.direct_tol,
            iterative_tol: self.solver.iterative_tol,
            max_iter: self.solver.max_iter,
            direct_flop_budget: self.solver.direct_flop_budget,
            ..SolverOptions::default()
        })
    }

    pub fn newton(&self) -> Result<NewtonOptions> {
        let n = NewtonOptions {
            rtol: self.newton.rtol,
            atol: self.newton.atol,
            max_iter: self.newton.max_iter,
            damping: self.newton.damping,
        };
        n.validate().map_err(|e| field("newton", e.to_string()))?;
        Ok(n)
    }

    pub fn ground_state_options(&self, spec: &ProblemSpec) -> Result<GroundStateOptions> {
        let g = &self.groundstate;
        let tau = g.tau.unwrap_or_else(|| recommended_flow_step(spec));
        if !(tau > 0.0) || !(g.tol > 0.0) || g.max_iter == 0 || g.stages == 0 {
            return Err(field("groundstate", "tau, tol, max_iter and stages must be positive"));
        }
        Ok(GroundStateOptions {
            tau,
            tol: g.tol,
            max_iter: g.max_iter,
            stages: g.stages,
            stage_tol: g.stage_tol,
            solver: self.solver()?,
            ..GroundStateOptions::default()
        })
    }

    /// Check everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        self.methods()?;
        self.re_init()?;
        self.time_grid(&spec)?;
        self.elements(&spec)?;
        self.solver()?;
        self.newton()?;
        if self.stride == 0 {
            return Err(field("stride", "must be at least 1"));
        }
        if self.repeats == 0 {
            return Err(field("repeats", "must be at least 1"));
        }
        if !(self.energy_ceiling > 0.0) {
            return Err(field("energy_ceiling", "must be positive"));
        }
        Ok(())
    }

    /// The `(tau, n_steps)` cells of a convergence sweep.
    pub fn sweep_steps(&self, spec: &ProblemSpec) -> Result<Vec<(f64, usize)>> {
        steps_list(self.final_time(spec)?, &self.converge.steps, &self.converge.taus, "converge")
    }

    pub fn stability_steps(&self, spec: &ProblemSpec) -> Result<Vec<(f64, usize)>> {
        steps_list(self.final_time(spec)?, &self.stability.steps, &self.stability.taus, "stability")
    }
}

fn steps_list(t: f64, steps: &[usize], taus: &[f64], section: &str) -> Result<Vec<(f64, usize)>> {
    let mut out = Vec::new();
    for (i, &n) in steps.iter().enumerate() {
        out.push(resolve_steps(t, None, Some(n), &format!("{section}.steps[{i}]"))?);
    }
    for (i, &tau) in taus.iter().enumerate() {
        out.push(resolve_steps(t, Some(tau), None, &format!("{section}.taus[{i}]"))?);
    }
    if out.len() < 2 && section == "converge" {
        return Err(field(section, "a sweep needs at least two step sizes"));
    }
    if out.is_empty() {
        return Err(field(section, "no step sizes given"));
    }
    Ok(out)
}

/// Pseudo-time step of the gradient flow when none is configured. Rotating
/// states need a large step to converge in a reasonable number of
/// iterations; everything else uses 0.01.
pub fn recommended_flow_step(spec: &ProblemSpec) -> f64 {
    match spec.initial {
        InitialState::GroundState { omega, .. } if omega != 0.0 => 2.0,
        _ => GroundStateOptions::default().tau,
    }
}

/// Reconcile a step size, a step count and a final time.
pub fn resolve_steps(t: f64, tau: Option<f64>, n: Option<usize>, name: &str) -> Result<(f64, usize)> {
    let tol = 1e-12 * t.max(1.0);
    match (tau, n) {
        (Some(tau), Some(n)) => {
            if !(tau > 0.0) {
                return Err(field(name, "step size must be positive"));
            }
            if (tau * n as f64 - t).abs() > tol {
                return Err(field(name, format!("tau * n_steps = {} differs from the final time {t}", tau * n as f64)));
            }
            Ok((tau, n))
        }
        (Some(tau), None) => {
            if !(tau > 0.0) {
                return Err(field(name, "step size must be positive"));
            }
            let n = (t / tau).round();
            if (tau * n - t).abs() > tol {
                return Err(field(name, format!("final time {t} is not a multiple of tau = {tau}")));
            }
            Ok((tau, n as usize))
        }
        (None, Some(n)) => {
            if n == 0 {
                return Ok((t.max(f64::MIN_POSITIVE), 0));
            }
            Ok((t / n as f64, n))
        }
        (None, None) => Err(field(name, "need a step size or a step count")),
    }
}

pub fn elements_from(e: &[usize], dim: usize, name: &str) -> Result<[usize; 2]> {
    match (dim, e) {
        (1, [n]) | (1, [n, 0]) if *n > 0 => Ok([*n, 0]),
        (2, [n]) if *n > 0 => Ok([*n, *n]),
        (2, [nx, ny]) if *nx > 0 && *ny > 0 => Ok([*nx, *ny]),
        _ => Err(field(name, format!("expected {dim} positive element count(s), got {e:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_sections() {
        let cfg = RunConfig::from_toml_str(
            r#"
            problem = "single_soliton"
            scheme = "CN-FEM"
            n_steps = 64
            final_time = 1.0
            [newton]
            max_iter = 12
            [converge]
            steps = [8, 16, 32]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.method().unwrap(), Method::Fem(SchemeId::Cn));
        assert_eq!(cfg.newton().unwrap().max_iter, 12);
        let spec = cfg.spec().unwrap();
        assert_eq!(cfg.time_grid(&spec).unwrap(), (1.0 / 64.0, 64));
        assert_eq!(cfg.sweep_steps(&spec).unwrap().len(), 3);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let err = RunConfig::from_toml_str("problem = \"x\"\nsheme = \"CN\"\n").unwrap_err().to_string();
        assert!(err.contains("sheme") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn step_consistency() {
        assert!(resolve_steps(1.0, Some(0.25), Some(4), "t").is_ok());
        assert!(resolve_steps(1.0, Some(0.25), Some(5), "t").is_err());
        assert!(resolve_steps(1.0, Some(0.3), None, "t").is_err());
        assert_eq!(resolve_steps(0.515, None, Some(2048), "t").unwrap().0, 0.515 / 2048.0);
        assert_eq!(resolve_steps(2.0, None, Some(0), "t").unwrap().1, 0);
    }

    #[test]
    fn bad_values_name_their_field() {
        let mut cfg = RunConfig { problem: "two_soliton".into(), ..Default::default() };
        cfg.scheme = "RK4".into();
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("scheme"), "{e}");
        cfg.scheme = "sp2".into();
        assert_eq!(cfg.method().unwrap(), Method::Sp2);
        cfg.elements = Some(vec![10, 10]);
        assert!(cfg.validate().unwrap_err().to_string().contains("elements"));
        cfg.elements = None;
        cfg.problem = "nope".into();
        assert!(cfg.validate().unwrap_err().to_string().contains("problem"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig { problem: "rotating".into(), schemes: vec!["IM".into(), "RE".into()], ..Default::default() };
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }
}
