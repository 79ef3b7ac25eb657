//! The five time discretizations.
//!
//! Every scheme advances `i M du/dt = H u` with `H = k A + M_V + beta W`.
//! The nonlinear schemes (implicit midpoint and Crank–Nicolson) solve a
//! real `2m x 2m` Newton system per step; the others solve one complex
//! linear system with a frozen density weight.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::assembly::{from_real_form, sample_density, to_real_form, NonlinearForm, Operators, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{solve, LinearSolveReport, SolverOptions};
use crate::quadrature::{QuadDensity, QuadField};
use crate::scalar::{norm2, Real};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// Implicit midpoint.
    Im,
    /// Crank–Nicolson with averaged densities.
    Cn,
    /// Relaxation with the recursively extrapolated density.
    Re,
    /// Linearized Crank–Nicolson with Adams–Bashforth density.
    Lcn,
    /// Linearized leapfrog over `2 tau`.
    TwoStep,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::Im, SchemeId::Cn, SchemeId::Re, SchemeId::Lcn, SchemeId::TwoStep];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Im => "IM",
            SchemeId::Cn => "CN",
            SchemeId::Re => "RE",
            SchemeId::Lcn => "LCN",
            SchemeId::TwoStep => "TWOSTEP",
        }
    }

    pub fn is_nonlinear(self) -> bool {
        matches!(self, SchemeId::Im | SchemeId::Cn)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_uppercase();
        let key = key.strip_suffix("FEM").unwrap_or(&key);
        match key {
            "IM" => Ok(SchemeId::Im),
            "CN" => Ok(SchemeId::Cn),
            "RE" => Ok(SchemeId::Re),
            "LCN" => Ok(SchemeId::Lcn),
            "TWOSTEP" => Ok(SchemeId::TwoStep),
            _ => Err(Error::Unknown { kind: "scheme", name: s.to_string() }),
        }
    }
}

/// Choice of the relaxation density `rho^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReInit {
    /// `rho^{-1/2} = |u0|^2`.
    #[default]
    Simple,
    /// Solve `i M (u0 - x)/tau = H_{|u0|^2} (u0 + x)` and take `|x|^2`.
    /// Taken literally this is a backward Crank–Nicolson step of size `2 tau`.
    HalfStep,
    /// Backward Crank–Nicolson step of size `tau / 2`, so `x ~ u(-tau/2)`.
    CenteredHalfStep,
}

impl FromStr for ReInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "simple" => Ok(ReInit::Simple),
            "halfstep" => Ok(ReInit::HalfStep),
            "centeredhalfstep" | "centered" => Ok(ReInit::CenteredHalfStep),
            _ => Err(Error::Unknown { kind: "relaxation initialization", name: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Residual target relative to `||M u^n|| / tau`.
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    /// Backtrack on the residual norm when a full step increases it.
    pub damping: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-300, max_iter: 30, damping: false }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("Newton tolerances must be positive and max_iter >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Final residual relative to the scale.
    pub residual: f64,
    pub linear_iterations: usize,
}

/// Newton's method on a real system, with the Jacobian solved directly
/// or iteratively per [`SolverOptions`].
///
/// Converges when `||F|| <= rtol * scale + atol`, or when the update has
/// shrunk to roundoff of the iterate.
pub fn newton_solve<T, R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: Vec<T>,
    scale: T,
    opts: &NewtonOptions,
    solver: &SolverOptions,
) -> Result<(Vec<T>, NewtonReport)>
where
    T: Real,
    R: FnMut(&[T]) -> Result<Vec<T>>,
    J: FnMut(&[T]) -> Result<CsrMatrix<T>>,
{
    opts.validate()?;
    let scale = scale.to_f64_lossy();
    let target = opts.rtol * scale + opts.atol;
    let rel = |r: f64| if scale > 0.0 { r / scale } else { r };
    let mut w = guess;
    let mut f = residual(&w)?;
    let mut r = norm2(&f).to_f64_lossy();
    let mut report = NewtonReport::default();
    let stall = 10.0 * T::epsilon().to_f64_lossy();
    loop {
        if !r.is_finite() {
            return Err(Error::NonFinite("Newton residual"));
        }
        report.residual = rel(r);
        if r <= target {
            return Ok((w, report));
        }
        if report.iterations == opts.max_iter {
            return Err(Error::NewtonDiverged { iterations: report.iterations, residual: rel(r) });
        }
        let j = jacobian(&w)?;
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let (delta, lin) = solve(&j, &rhs, solver)?;
        report.linear_iterations += lin.iterations;
        report.iterations += 1;
        let mut step = T::one();
        let mut candidate: Vec<T>;
        loop {
            candidate = w.iter().zip(&delta).map(|(&a, &d)| a + step * d).collect();
            let fc = residual(&candidate)?;
            let rc = norm2(&fc).to_f64_lossy();
            if !opts.damping || rc < r || step < T::lit(1.0 / 1024.0) {
                f = fc;
                r = rc;
                break;
            }
            step = step * T::lit(0.5);
        }
        let dn = norm2(&delta).to_f64_lossy() * step.to_f64_lossy();
        let wn = norm2(&candidate).to_f64_lossy();
        w = candidate;
        if r.is_finite() && dn <= stall * wn {
            report.residual = rel(r);
            return Ok((w, report));
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepParams<T> {
    pub tau: T,
    pub beta: T,
    pub newton: NewtonOptions,
    pub solver: SolverOptions,
}

impl<T: Real> StepParams<T> {
    pub fn new(tau: T, beta: T) -> Self {
        Self { tau, beta, newton: NewtonOptions::default(), solver: SolverOptions::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.tau)));
        }
        if !self.beta.is_finite() {
            return Err(Error::NonFinite("beta"));
        }
        self.newton.validate()
    }
}

/// Scheme-specific memory carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub enum Memory<T> {
    None,
    /// Relaxation density of the previous half step, `rho^{n-1/2}`.
    Density(QuadDensity<T>),
    /// Previous level `u^{n-1}`; `None` until the startup step has run.
    Previous(Option<StateVector<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperState<T> {
    pub u: StateVector<T>,
    pub t: T,
    pub n: usize,
    pub memory: Memory<T>,
}

impl<T: Real> StepperState<T> {
    fn advance(&mut self, u: StateVector<T>, tau: T) {
        self.u = u;
        self.n += 1;
        self.t += tau;
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub linear_solves: usize,
    pub linear_iterations: usize,
}

impl StepStats {
    fn linear(&mut self, r: &LinearSolveReport) {
        self.linear_solves += 1;
        self.linear_iterations += r.iterations;
    }
}

/// Solve `(i a M - g_lhs H_rho) x = (i a M + g_rhs H_rho) y` with homogeneous
/// Dirichlet rows.
fn frozen_solve<T: Real>(
    ops: &Operators<T>,
    rho: Option<&QuadDensity<T>>,
    p: &StepParams<T>,
    a: T,
    g_lhs: T,
    g_rhs: T,
    y: &[Complex<T>],
    stats: &mut StepStats,
) -> Result<StateVector<T>> {
    let h = ops.density_hamiltonian(rho, p.beta)?;
    let mut lhs = ops.shifted(&h, a, -g_lhs);
    lhs.apply_dirichlet(ops.boundary_mask());
    let my = ops.mass.matvec_complex(y)?;
    let hy = h.matvec_complex(y)?;
    let mut rhs: Vec<_> = my.iter().zip(&hy).map(|(m, h)| Complex::new(-m.im, m.re) * a + h * g_rhs).collect();
    ops.zero_boundary(&mut rhs);
    let (x, rep) = solve(&lhs, &rhs, &p.solver)?;
    stats.linear(&rep);
    if x.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("linear step"));
    }
    Ok(x)
}

fn half<T: Real>() -> T {
    T::lit(0.5)
}

fn nonlinear_step<T: Real>(
    ops: &Operators<T>,
    state: &mut StepperState<T>,
    p: &StepParams<T>,
    form: NonlinearForm,
) -> Result<StepStats> {
    p.validate()?;
    ops.check_state(&state.u)?;
    let u_old = state.u.clone();
    let scale = norm2(&ops.mass.matvec_complex(&u_old)?) / p.tau;
    let (x, rep) = newton_solve(
        |x| Ok(to_real_form(&ops.nonlinear_residual(form, &u_old, &from_real_form(x), p.beta, p.tau)?)),
        |x| ops.newton_jacobian(form, &u_old, &from_real_form(x), p.beta, p.tau),
        to_real_form(&u_old),
        scale,
        &p.newton,
        &p.solver,
    )?;
    state.advance(from_real_form(&x), p.tau);
    Ok(StepStats { newton_iterations: rep.iterations, linear_solves: rep.iterations, linear_iterations: rep.linear_iterations })
}

/// One implicit midpoint step.
pub fn step_im<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    nonlinear_step(ops, state, p, NonlinearForm::Midpoint)
}

/// One Crank–Nicolson step.
pub fn step_cn<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    nonlinear_step(ops, state, p, NonlinearForm::AveragedDensity)
}

/// `2 |u|^2 - rho_prev`, pointwise at quadrature points.
pub fn relaxation_density<T: Real>(ops: &Operators<T>, u: &[Complex<T>], rho_prev: &QuadDensity<T>) -> Result<QuadDensity<T>> {
    rho_prev.check_layout(ops.space())?;
    let rho = sample_density(ops.space(), u)?;
    let two = T::lit(2.0);
    let values = rho.values.iter().zip(&rho_prev.values).map(|(&r, &q)| two * r - q).collect();
    Ok(QuadField { values, n_points: rho.n_points })
}

/// State for the relaxation scheme with `rho^{-1/2}` chosen by `mode`.
pub fn re_initialize<T: Real>(
    ops: &Operators<T>,
    u0: StateVector<T>,
    mode: ReInit,
    p: &StepParams<T>,
) -> Result<StepperState<T>> {
    p.validate()?;
    ops.check_state(&u0)?;
    let rho0 = sample_density(ops.space(), &u0)?;
    let mut stats = StepStats::default();
    let rho = match mode {
        ReInit::Simple => rho0,
        ReInit::HalfStep => {
            // (iM/tau + H) x = (iM/tau - H) u0
            let x = frozen_solve(ops, Some(&rho0), p, T::one() / p.tau, -T::one(), -T::one(), &u0, &mut stats)?;
            sample_density(ops.space(), &x)?
        }
        ReInit::CenteredHalfStep => {
            // (2iM/tau + H/2) x = (2iM/tau - H/2) u0
            let a = T::lit(2.0) / p.tau;
            let x = frozen_solve(ops, Some(&rho0), p, a, -half::<T>(), -half::<T>(), &u0, &mut stats)?;
            sample_density(ops.space(), &x)?
        }
    };
    Ok(StepperState { u: u0, t: T::zero(), n: 0, memory: Memory::Density(rho) })
}

fn memory_error(scheme: &str) -> Error {
    Error::InvalidArgument(format!("stepper state does not carry the memory of the {scheme} scheme"))
}

/// One relaxation step: extrapolate the density, then a frozen-density
/// Crank–Nicolson solve.
pub fn step_re<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    p.validate()?;
    ops.check_state(&state.u)?;
    let Memory::Density(rho_prev) = &state.memory else {
        return Err(memory_error("relaxation"));
    };
    let rho = relaxation_density(ops, &state.u, rho_prev)?;
    let mut stats = StepStats::default();
    let u = frozen_solve(ops, Some(&rho), p, T::one() / p.tau, half(), half(), &state.u, &mut stats)?;
    state.advance(u, p.tau);
    state.memory = Memory::Density(rho);
    Ok(stats)
}

/// First linearized Crank–Nicolson step: a backward Euler half step with
/// density `|u0|^2` gives the extrapolation point, then a full step.
pub fn lcn_startup<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    p.validate()?;
    ops.check_state(&state.u)?;
    let mut stats = StepStats::default();
    let u0 = state.u.clone();
    let rho0 = sample_density(ops.space(), &u0)?;
    let a = T::lit(2.0) / p.tau;
    let u_hat = frozen_solve(ops, Some(&rho0), p, a, T::one(), T::zero(), &u0, &mut stats)?;
    let rho = sample_density(ops.space(), &u_hat)?;
    let u1 = frozen_solve(ops, Some(&rho), p, T::one() / p.tau, half(), half(), &u0, &mut stats)?;
    state.advance(u1, p.tau);
    state.memory = Memory::Previous(Some(u0));
    Ok(stats)
}

/// One linearized Crank–Nicolson step with density `|(3u^n - u^{n-1})/2|^2`;
/// runs the startup when no history is stored yet.
pub fn step_lcn<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    let prev = match &state.memory {
        Memory::Previous(Some(prev)) => prev,
        Memory::Previous(None) => return lcn_startup(ops, state, p),
        _ => return Err(memory_error("linearized Crank-Nicolson")),
    };
    p.validate()?;
    ops.check_state(&state.u)?;
    ops.check_state(prev)?;
    let three_half = T::lit(1.5);
    let u_hat: Vec<_> = state.u.iter().zip(prev).map(|(u, v)| u * three_half - v * half::<T>()).collect();
    let rho = sample_density(ops.space(), &u_hat)?;
    let mut stats = StepStats::default();
    let u = frozen_solve(ops, Some(&rho), p, T::one() / p.tau, half(), half(), &state.u, &mut stats)?;
    let old = std::mem::replace(&mut state.u, u);
    state.n += 1;
    state.t += p.tau;
    state.memory = Memory::Previous(Some(old));
    Ok(stats)
}

/// Initial double step of the two-step scheme: a half step with density
/// `|u0|^2`, then a full step with the density of the half-step solution.
pub fn twostep_startup<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    p.validate()?;
    ops.check_state(&state.u)?;
    let mut stats = StepStats::default();
    let u0 = state.u.clone();
    let rho0 = sample_density(ops.space(), &u0)?;
    let u_half = frozen_solve(ops, Some(&rho0), p, T::lit(2.0) / p.tau, half(), half(), &u0, &mut stats)?;
    let rho = sample_density(ops.space(), &u_half)?;
    let u1 = frozen_solve(ops, Some(&rho), p, T::one() / p.tau, half(), half(), &u0, &mut stats)?;
    state.advance(u1, p.tau);
    state.memory = Memory::Previous(Some(u0));
    Ok(stats)
}

/// One two-step update
/// `(iM/(2 tau) - H_{|u^n|^2}/2) u^{n+1} = (iM/(2 tau) + H_{|u^n|^2}/2) u^{n-1}`;
/// runs the startup when no history is stored yet.
pub fn step_twostep<T: Real>(ops: &Operators<T>, state: &mut StepperState<T>, p: &StepParams<T>) -> Result<StepStats> {
    let prev = match &state.memory {
        Memory::Previous(Some(prev)) => prev,
        Memory::Previous(None) => return twostep_startup(ops, state, p),
        _ => return Err(memory_error("two-step")),
    };
    p.validate()?;
    ops.check_state(&state.u)?;
    ops.check_state(prev)?;
    let rho = sample_density(ops.space(), &state.u)?;
    let mut stats = StepStats::default();
    let a = T::one() / (T::lit(2.0) * p.tau);
    let u = frozen_solve(ops, Some(&rho), p, a, half(), half(), prev, &mut stats)?;
    let old = std::mem::replace(&mut state.u, u);
    state.n += 1;
    state.t += p.tau;
    state.memory = Memory::Previous(Some(old));
    Ok(stats)
}

/// A scheme bound to its operators and parameters.
#[derive(Debug, Clone, Copy)]
pub struct Stepper<'a, T> {
    ops: &'a Operators<T>,
    pub scheme: SchemeId,
    pub params: StepParams<T>,
    pub re_init: ReInit,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(ops: &'a Operators<T>, scheme: SchemeId, params: StepParams<T>) -> Self {
        Self { ops, scheme, params, re_init: ReInit::Simple }
    }

    pub fn with_re_init(mut self, mode: ReInit) -> Self {
        self.re_init = mode;
        self
    }

    pub fn operators(&self) -> &'a Operators<T> {
        self.ops
    }

    /// Initial state at `t = 0`. Boundary coefficients of `u0` are zeroed.
    pub fn start(&self, mut u0: StateVector<T>) -> Result<StepperState<T>> {
        self.params.validate()?;
        self.ops.check_state(&u0)?;
        if u0.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("initial state"));
        }
        self.ops.zero_boundary(&mut u0);
        match self.scheme {
            SchemeId::Re => re_initialize(self.ops, u0, self.re_init, &self.params),
            SchemeId::Lcn | SchemeId::TwoStep => Ok(StepperState { u: u0, t: T::zero(), n: 0, memory: Memory::Previous(None) }),
            SchemeId::Im | SchemeId::Cn => Ok(StepperState { u: u0, t: T::zero(), n: 0, memory: Memory::None }),
        }
    }

    /// Advance by one time step.
    pub fn step(&self, state: &mut StepperState<T>) -> Result<StepStats> {
        match self.scheme {
            SchemeId::Im => step_im(self.ops, state, &self.params),
            SchemeId::Cn => step_cn(self.ops, state, &self.params),
            SchemeId::Re => step_re(self.ops, state, &self.params),
            SchemeId::Lcn => step_lcn(self.ops, state, &self.params),
            SchemeId::TwoStep => step_twostep(self.ops, state, &self.params),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::interpolate_nodal;
    use crate::mesh::Mesh;
    use crate::quadrature::P1Space;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn ops_1d(n: usize) -> Operators<f64> {
        let sp = P1Space::new(Mesh::<f64>::interval(-8.0, 8.0, n).unwrap());
        Operators::free(sp, 1.0).unwrap()
    }

    fn gaussian(ops: &Operators<f64>) -> StateVector<f64> {
        interpolate_nodal(ops.mesh(), |x| C::from_polar((-x[0] * x[0]).exp(), 0.7 * x[0]), true)
    }

    fn dist(a: &[C], b: &[C]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
    }

    fn mass(ops: &Operators<f64>, u: &[C]) -> f64 {
        ops.mass.quadratic_form(u).unwrap()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert_eq!("two-step".parse::<SchemeId>().unwrap(), SchemeId::TwoStep);
        assert_eq!("RE-FEM".parse::<SchemeId>().unwrap(), SchemeId::Re);
        assert!("rk4".parse::<SchemeId>().is_err());
    }

    #[test]
    fn newton_linear_problem_takes_one_iteration() {
        let b = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]).unwrap();
        let rhs = vec![1.0f64, 2.0];
        let (x, rep) = newton_solve(
            |w| Ok(b.matvec(w)?.iter().zip(&rhs).map(|(a, c)| a - c).collect()),
            |_| Ok(b.clone()),
            vec![0.0, 0.0],
            1.0,
            &NewtonOptions::default(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!((x[1] - 2.0 / 3.0).abs() < 1e-14 && (x[0] - 1.0 / 6.0).abs() < 1e-14);
        let (_, rep) = newton_solve(
            |w| Ok(b.matvec(w)?.iter().zip(&rhs).map(|(a, c)| a - c).collect()),
            |_| Ok(b.clone()),
            x,
            1.0,
            &NewtonOptions::default(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn newton_reports_divergence() {
        // x^2 + 1 = 0 has no real root
        let j = |w: &[f64]| CsrMatrix::from_triplets(1, &[(0, 0, 2.0 * w[0])]);
        let err = newton_solve(|w| Ok(vec![w[0] * w[0] + 1.0]), j, vec![0.5], 1.0, &NewtonOptions { max_iter: 8, ..Default::default() }, &SolverOptions::default());
        assert!(matches!(err, Err(Error::NewtonDiverged { iterations: 8, .. })));
        assert!(NewtonOptions { max_iter: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn linear_schemes_coincide_with_crank_nicolson_propagator() {
        let ops = ops_1d(64);
        let tau = 0.05;
        let p = StepParams::new(tau, 0.0);
        let u0 = gaussian(&ops);
        let mut lhs = ops.shifted(&ops.hamiltonian, 1.0 / tau, -0.5);
        lhs.apply_dirichlet(ops.boundary_mask());
        let mut rhs = ops.shifted(&ops.hamiltonian, 1.0 / tau, 0.5).matvec(&u0).unwrap();
        ops.zero_boundary(&mut rhs);
        let (want, _) = solve(&lhs, &rhs, &SolverOptions::default()).unwrap();
        for scheme in [SchemeId::Im, SchemeId::Cn, SchemeId::Re, SchemeId::Lcn] {
            let st = Stepper::new(&ops, scheme, p);
            let mut s = st.start(u0.clone()).unwrap();
            st.step(&mut s).unwrap();
            assert!(dist(&s.u, &want) < 1e-10, "{scheme}: {}", dist(&s.u, &want));
            assert_eq!(s.n, 1);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let ops = ops_1d(16);
        let z = vec![C::new(0.0, 0.0); 17];
        for scheme in SchemeId::ALL {
            let st = Stepper::new(&ops, scheme, StepParams::new(0.1, 5.0));
            let mut s = st.start(z.clone()).unwrap();
            for _ in 0..3 {
                st.step(&mut s).unwrap();
            }
            assert!(s.u.iter().all(|v| v.norm() == 0.0), "{scheme}");
        }
    }

    #[test]
    fn nonlinear_schemes_conserve_mass_and_cn_energy() {
        let ops = ops_1d(128);
        let u0 = gaussian(&ops);
        let m0 = mass(&ops, &u0);
        let beta = -3.0;
        let energy = |u: &[C]| ops.hamiltonian.quadratic_form(u).unwrap() + 0.5 * beta * ops.quartic_integral(u).unwrap();
        let e0 = energy(&u0);
        for scheme in SchemeId::ALL {
            let st = Stepper::new(&ops, scheme, StepParams::new(0.05, beta));
            let mut s = st.start(u0.clone()).unwrap();
            for _ in 0..20 {
                let stats = st.step(&mut s).unwrap();
                if scheme.is_nonlinear() {
                    assert!(stats.newton_iterations <= 8);
                }
            }
            assert!(((mass(&ops, &s.u) - m0) / m0).abs() < 1e-10, "{scheme}");
            if scheme == SchemeId::Cn {
                assert!(((energy(&s.u) - e0) / e0).abs() < 1e-9);
            }
            assert!((s.t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_relaxation_density_gives_frozen_step() {
        let ops = ops_1d(32);
        let u0 = gaussian(&ops);
        let p = StepParams::new(0.1, 2.0);
        let rho = sample_density(ops.space(), &u0).unwrap();
        assert_eq!(relaxation_density(&ops, &u0, &rho).unwrap(), rho);
        let mut s = StepperState { u: u0.clone(), t: 0.0, n: 0, memory: Memory::Density(rho.clone()) };
        step_re(&ops, &mut s, &p).unwrap();
        let mut stats = StepStats::default();
        let want = frozen_solve(&ops, Some(&rho), &p, 10.0, 0.5, 0.5, &u0, &mut stats).unwrap();
        assert!(dist(&s.u, &want) < 1e-14);
    }

    #[test]
    fn half_step_initialization_rotates_eigenvector_phase() {
        // beta = 0, V = 0: for a discrete Dirichlet eigenvector A v = lam M v the
        // literal initialization gives x = (i/tau - lam)/(i/tau + lam) v
        let n = 40;
        let sp = P1Space::new(Mesh::<f64>::interval(0.0, 1.0, n).unwrap());
        let ops = Operators::free(sp, 1.0).unwrap();
        let h = 1.0 / n as f64;
        let v: Vec<C> = (0..=n).map(|i| C::new((std::f64::consts::PI * i as f64 * h).sin(), 0.0)).collect();
        let c = (std::f64::consts::PI * h).cos();
        let lam = 6.0 / (h * h) * (1.0 - c) / (2.0 + c);
        let tau = 1e-3;
        let p = StepParams::new(tau, 0.0);
        let mut stats = StepStats::default();
        let x = frozen_solve(&ops, None, &p, 1.0 / tau, -1.0, -1.0, &v, &mut stats).unwrap();
        let factor = C::new(-lam, 1.0 / tau) / C::new(lam, 1.0 / tau);
        for (xi, vi) in x.iter().zip(&v) {
            assert!((xi - vi * factor).norm() < 1e-10);
        }
        // modulus profile unchanged, phase O(tau)
        assert!((factor.norm() - 1.0).abs() < 1e-14);
        assert!(factor.arg().abs() < 3.0 * lam * tau);
        let s = re_initialize(&ops, v.clone(), ReInit::HalfStep, &p).unwrap();
        let Memory::Density(rho) = s.memory else { panic!() };
        assert_eq!(rho.values.len(), ops.space().n_quad_total());
    }

    #[test]
    fn history_equal_to_current_degenerates_to_frozen_step() {
        let ops = ops_1d(32);
        let u0 = gaussian(&ops);
        let p = StepParams::new(0.1, 2.0);
        let mut s = StepperState { u: u0.clone(), t: 0.0, n: 1, memory: Memory::Previous(Some(u0.clone())) };
        step_lcn(&ops, &mut s, &p).unwrap();
        let rho = sample_density(ops.space(), &u0).unwrap();
        let mut stats = StepStats::default();
        let want = frozen_solve(&ops, Some(&rho), &p, 10.0, 0.5, 0.5, &u0, &mut stats).unwrap();
        assert!(dist(&s.u, &want) < 1e-14);
    }

    #[test]
    fn missing_memory_is_rejected() {
        let ops = ops_1d(8);
        let mut s = StepperState { u: vec![C::new(0.0, 0.0); 9], t: 0.0, n: 0, memory: Memory::None };
        let p = StepParams::new(0.1, 1.0);
        assert!(step_re(&ops, &mut s, &p).is_err());
        assert!(step_lcn(&ops, &mut s, &p).is_err());
        assert!(step_twostep(&ops, &mut s, &p).is_err());
        assert!(Stepper::new(&ops, SchemeId::Cn, StepParams::new(-1.0, 0.0)).start(s.u.clone()).is_err());
    }

    fn random_state(n: usize, seed: u64) -> Vec<C> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut u: Vec<C> = (0..n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        u[0] = C::new(0.0, 0.0);
        u[n - 1] = C::new(0.0, 0.0);
        u
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// For a fixed density weight every linear step is linear in the
        /// state it propagates.
        #[test]
        fn frozen_steps_superpose(seed in 0u64..500, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let ops = ops_1d(24);
            let p = StepParams::new(0.05, 4.0);
            let rho = sample_density(ops.space(), &random_state(25, seed + 99)).unwrap();
            let x = random_state(25, seed);
            let y = random_state(25, seed + 1);
            let comb: Vec<C> = x.iter().zip(&y).map(|(p, q)| p * a + q * b).collect();
            let mut st = StepStats::default();
            for (alpha, gl, gr) in [(20.0, 0.5, 0.5), (10.0, 0.5, 0.5), (40.0, 1.0, 0.0)] {
                let fx = frozen_solve(&ops, Some(&rho), &p, alpha, gl, gr, &x, &mut st).unwrap();
                let fy = frozen_solve(&ops, Some(&rho), &p, alpha, gl, gr, &y, &mut st).unwrap();
                let fc = frozen_solve(&ops, Some(&rho), &p, alpha, gl, gr, &comb, &mut st).unwrap();
                let want: Vec<C> = fx.iter().zip(&fy).map(|(p, q)| p * a + q * b).collect();
                prop_assert!(dist(&fc, &want) < 1e-10);
            }
        }

        #[test]
        fn every_scheme_conserves_mass(seed in 0u64..500, beta in -4.0f64..4.0) {
            let ops = ops_1d(24);
            let u0 = random_state(25, seed);
            let m0 = mass(&ops, &u0);
            for scheme in SchemeId::ALL {
                let st = Stepper::new(&ops, scheme, StepParams::new(0.02, beta));
                let mut s = st.start(u0.clone()).unwrap();
                for _ in 0..5 {
                    st.step(&mut s).unwrap();
                }
                prop_assert!(((mass(&ops, &s.u) - m0) / m0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn f32_steps_run() {
        let sp = P1Space::new(Mesh::<f32>::interval(-4.0, 4.0, 32).unwrap());
        let ops = Operators::free(sp, 1.0f32).unwrap();
        let u0 = interpolate_nodal(ops.mesh(), |x| Complex::new((-x[0] * x[0]).exp(), 0.0), true);
        let m0 = ops.mass.quadratic_form(&u0).unwrap();
        for scheme in SchemeId::ALL {
            let mut p = StepParams::new(0.05f32, 1.0);
            p.newton.rtol = 1e-5;
            let st = Stepper::new(&ops, scheme, p);
            let mut s = st.start(u0.clone()).unwrap();
            for _ in 0..4 {
                st.step(&mut s).unwrap();
            }
            let m = ops.mass.quadratic_form(&s.u).unwrap();
            assert!(((m - m0) / m0).abs() < 1e-4, "{scheme}");
        }
    }
}
