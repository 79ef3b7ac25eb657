//! The experiment catalog: domains, potentials, interaction strengths,
//! closed-form solutions and initial-state construction.

mod ground_state;
mod state_file;

pub use ground_state::{
    count_vortices, gaussian_guess, ground_state, ground_state_energy, GroundStateOptions, GroundStateResult,
};
pub use state_file::{load_state, read_state, save_state, write_state};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::assembly::{interpolate_nodal, Operators, StateVector};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::observables::PointwiseField;
use crate::quadrature::{P1Space, WeightField};
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// closed-form solutions

/// `sqrt(2) exp(i(x/2 + 3t/4)) sech(x - t)`, a solution for `beta = -1`
/// and unit kinetic coefficient.
pub fn exact_single_soliton<T: Real>(x: T, t: T) -> Complex<T> {
    let amp = T::lit(2.0).sqrt() / (x - t).cosh();
    Complex::from_polar(amp, x * T::lit(0.5) + t * T::lit(0.75))
}

fn single_soliton_dx<T: Real>(x: T, t: T) -> Complex<T> {
    let s = x - t;
    let u = exact_single_soliton(x, t);
    u * Complex::new(-s.tanh(), T::lit(0.5))
}

/// Numerator, its x-derivative, denominator and its x-derivative of the
/// two-soliton formula, all multiplied by `exp(-6|x|)` so that nothing
/// overflows on wide domains.
fn two_soliton_parts<T: Real>(x: T, t: T) -> (Complex<T>, Complex<T>, T, T) {
    let l = |c: f64| T::lit(c);
    let e = |k: f64| (l(k) * x).exp();
    let p4 = Complex::from_polar(l(8.0), l(4.0) * t);
    let p16 = Complex::from_polar(l(32.0), l(16.0) * t);
    let c12 = (l(12.0) * t).cos();
    // exponents shifted by -6 for x >= 0 and +6 for x < 0
    let s = if x >= T::zero() { -6.0 } else { 6.0 };
    let f = |k: f64| e(k + s);
    let num = p4 * (l(9.0) * f(-4.0) + l(16.0) * f(4.0)) - p16 * (l(4.0) * f(-2.0) + l(9.0) * f(2.0));
    let dnum = p4 * (l(-36.0) * f(-4.0) + l(64.0) * f(4.0)) - p16 * (l(-8.0) * f(-2.0) + l(18.0) * f(2.0));
    let den = l(-128.0) * c12 * f(0.0) + l(4.0) * f(-6.0) + l(16.0) * f(6.0) + l(81.0) * f(-2.0) + l(64.0) * f(2.0);
    let dden = l(-24.0) * f(-6.0) + l(96.0) * f(6.0) + l(-162.0) * f(-2.0) + l(128.0) * f(2.0);
    (num, dnum, den, dden)
}

/// The breather of two stationary solitons, a solution for `beta = -2` and
/// unit kinetic coefficient. Its density is periodic in time with period
/// `pi/6`.
pub fn exact_two_soliton<T: Real>(x: T, t: T) -> Complex<T> {
    let (num, _, den, _) = two_soliton_parts(x, t);
    num / den
}

fn two_soliton_dx<T: Real>(x: T, t: T) -> Complex<T> {
    let (num, dnum, den, dden) = two_soliton_parts(x, t);
    (dnum * den - num * dden) / (den * den)
}

/// Closed-form reference solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactSolution {
    SingleSoliton,
    TwoSoliton,
}

impl ExactSolution {
    pub fn value<T: Real>(self, x: &[T], t: T) -> Complex<T> {
        match self {
            Self::SingleSoliton => exact_single_soliton(x[0], t),
            Self::TwoSoliton => exact_two_soliton(x[0], t),
        }
    }

    /// `du/dx`
    pub fn derivative<T: Real>(self, x: &[T], t: T) -> Complex<T> {
        match self {
            Self::SingleSoliton => single_soliton_dx(x[0], t),
            Self::TwoSoliton => two_soliton_dx(x[0], t),
        }
    }

    /// The solution frozen at time `t`, usable as an error reference.
    pub fn at<T: Real>(self, t: T) -> ExactAt<T> {
        ExactAt { solution: self, t }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SingleSoliton => "single_soliton",
            Self::TwoSoliton => "two_soliton",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactAt<T> {
    pub solution: ExactSolution,
    pub t: T,
}

impl<T: Real> PointwiseField<T> for ExactAt<T> {
    fn value(&self, x: &[T]) -> Complex<T> {
        self.solution.value(x, self.t)
    }

    fn gradient(&self, x: &[T], grad: &mut [Complex<T>]) {
        grad[0] = self.solution.derivative(x, self.t);
    }
}

// ---------------------------------------------------------------------------
// potentials

/// Closed-form potentials used by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `sum_i c_i x_i^2`
    Quadratic { coeffs: [f64; 2] },
    /// `(gamma x)^2 + amplitude sin(pi x / 4)^2`
    Lattice1d { gamma: f64, amplitude: f64 },
    /// Optical lattice `787 sum sin(pi x_i / 2)^2`, trap
    /// `1/2 sum (gamma_i x_i)^2` and the confining frame
    /// `1000 sum (|x_i| - 4.5)^5` for `|x_i| >= 4.5`.
    FramedLattice { gamma: [f64; 2] },
    /// `trap |x|^2 + lattice sum sin(2 pi x_i)^2`
    MottLattice { trap: f64, lattice: f64 },
}

impl Potential {
    /// Look up a potential by name. Parameters, all optional:
    /// `harmonic [c]`, `quadratic c1 c2`, `lattice1d [gamma amplitude]`,
    /// `lattice2d [g1 g2]`, `mott [trap lattice]`, `zero`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let p = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let pot = match name {
            "zero" => Self::Zero,
            "harmonic" => {
                let c = p(0, 0.5);
                Self::Quadratic { coeffs: [c, c] }
            }
            "quadratic" => Self::Quadratic { coeffs: [p(0, 0.5), p(1, 0.5)] },
            "lattice1d" => Self::Lattice1d { gamma: p(0, 0.5), amplitude: p(1, 500.0) },
            "lattice2d" => Self::FramedLattice { gamma: [p(0, 4.0), p(1, 8.0)] },
            "mott" => Self::MottLattice { trap: p(0, 2.0), lattice: p(1, 2000.0) },
            _ => return Err(Error::Unknown { kind: "potential", name: name.to_string() }),
        };
        let n_max = match name {
            "zero" => 0,
            "harmonic" => 1,
            _ => 2,
        };
        if params.len() > n_max {
            return Err(Error::InvalidArgument(format!("potential `{name}` takes at most {n_max} parameters")));
        }
        Ok(pot)
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        let l = |c: f64| T::lit(c);
        match self {
            Self::Zero => T::zero(),
            Self::Quadratic { coeffs } => x.iter().zip(coeffs).map(|(&xi, &c)| l(c) * xi * xi).sum(),
            Self::Lattice1d { gamma, amplitude } => {
                let gx = l(*gamma) * x[0];
                let s = (x[0] * T::PI() / l(4.0)).sin();
                gx * gx + l(*amplitude) * s * s
            }
            Self::FramedLattice { gamma } => {
                let mut v = T::zero();
                for (&xi, &g) in x.iter().zip(gamma) {
                    let s = (T::PI() * xi / l(2.0)).sin();
                    let gx = l(g) * xi;
                    v += l(787.0) * s * s + l(0.5) * gx * gx;
                    let d = xi.abs() - l(4.5);
                    if d >= T::zero() {
                        v += l(1000.0) * d.powi(5);
                    }
                }
                v
            }
            Self::MottLattice { trap, lattice } => {
                let mut v = T::zero();
                for &xi in x {
                    let s = (l(2.0) * T::PI() * xi).sin();
                    v += l(*trap) * xi * xi + l(*lattice) * s * s;
                }
                v
            }
        }
    }

    /// Samples at the quadrature points of `space`.
    pub fn sample<T: Real>(&self, space: &P1Space<T>) -> WeightField<T> {
        space.sample(|x| self.eval(x))
    }
}

/// Named potential lookup; see [`Potential::from_name`].
pub fn potential_catalog(name: &str, params: &[f64]) -> Result<Potential> {
    Potential::from_name(name, params)
}

// ---------------------------------------------------------------------------
// problem catalog

/// Problem size: desk-scale defaults or the full-size meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(Error::Unknown { kind: "profile", name: s.to_string() }),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Desk => "desk",
            Self::Paper => "paper",
        })
    }
}

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// The exact solution at `t = 0`.
    Exact,
    /// The ground state of a (possibly different) stationary problem.
    GroundState { potential: Potential, beta: f64, omega: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub dim: usize,
    /// Lower corner; the second entry is unused in 1D.
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub beta: f64,
    /// Coefficient of `-Laplace`: 1 for the solitons, 1/2 elsewhere.
    pub kinetic: f64,
    /// Potential of the dynamics.
    pub potential: Potential,
    pub initial: InitialState,
    pub final_time: f64,
    pub exact: Option<ExactSolution>,
    /// Default element counts per direction (`[n, 0]` in 1D).
    pub elements: [usize; 2],
    pub n_steps: usize,
}

impl ProblemSpec {
    pub fn tau(&self) -> f64 {
        self.final_time / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("problem {}: {m}", self.name)));
        if self.dim != 1 && self.dim != 2 {
            return bad("dimension must be 1 or 2");
        }
        for c in 0..self.dim {
            if !(self.lower[c] < self.upper[c]) || self.elements[c] == 0 {
                return bad("empty domain or zero elements");
            }
        }
        if self.exact.is_some() && self.dim != 1 {
            return bad("closed-form solutions are one-dimensional");
        }
        if self.exact.is_none() && self.initial == InitialState::Exact {
            return bad("exact initial state without a closed form");
        }
        if let InitialState::GroundState { omega, .. } = self.initial {
            if omega != 0.0 && self.dim != 2 {
                return bad("rotation needs two dimensions");
            }
        }
        if !(self.final_time >= 0.0) || self.kinetic <= 0.0 {
            return bad("final time and kinetic coefficient must be positive");
        }
        Ok(())
    }

    /// Mesh with the default element counts.
    pub fn mesh<T: Real>(&self) -> Result<Mesh<T>> {
        self.mesh_with(self.elements)
    }

    pub fn mesh_with<T: Real>(&self, elements: [usize; 2]) -> Result<Mesh<T>> {
        let l = |c: f64| T::lit(c);
        match self.dim {
            1 => Mesh::interval(l(self.lower[0]), l(self.upper[0]), elements[0]),
            _ => Mesh::rectangle(
                (l(self.lower[0]), l(self.upper[0])),
                (l(self.lower[1]), l(self.upper[1])),
                elements[0],
                elements[1],
            ),
        }
    }

    /// Operators of the dynamics on `mesh`.
    pub fn operators<T: Real>(&self, mesh: Mesh<T>) -> Result<Operators<T>> {
        let space = P1Space::new(mesh);
        let v = self.potential.sample(&space);
        Operators::new(space, v, T::lit(self.kinetic))
    }

    /// Operators of the stationary problem defining the initial state;
    /// `None` for closed-form initial data.
    pub fn ground_state_operators<T: Real>(&self, mesh: Mesh<T>) -> Result<Option<Operators<T>>> {
        match &self.initial {
            InitialState::Exact => Ok(None),
            InitialState::GroundState { potential, .. } => {
                let space = P1Space::new(mesh);
                let v = potential.sample(&space);
                Operators::new(space, v, T::lit(self.kinetic)).map(Some)
            }
        }
    }

    /// Interpolant of the exact solution at `t = 0` with zero boundary
    /// values, or `None` when the initial state is a ground state.
    pub fn exact_initial<T: Real>(&self, mesh: &Mesh<T>) -> Option<StateVector<T>> {
        let sol = self.exact?;
        Some(interpolate_nodal(mesh, |x| sol.value(x, T::zero()), true))
    }

    /// Initial state on `mesh`, solving the ground-state problem if needed.
    pub fn initial_state<T: Real>(&self, mesh: &Mesh<T>, opts: &GroundStateOptions) -> Result<StateVector<T>> {
        if let Some(u) = self.exact_initial(mesh) {
            return Ok(u);
        }
        let InitialState::GroundState { beta, omega, .. } = &self.initial else {
            unreachable!("validated spec")
        };
        let ops = self.ground_state_operators(mesh.clone())?.expect("ground-state problem");
        Ok(ground_state(&ops, T::lit(*beta), T::lit(*omega), None, opts)?.state)
    }
}

/// All six experiments at the given profile.
pub fn problem_catalog(profile: Profile) -> Vec<ProblemSpec> {
    let paper = profile == Profile::Paper;
    let pick = |desk: usize, full: usize| if paper { full } else { desk };
    let lattice_gs = Potential::Lattice1d { gamma: 1.0, amplitude: 500.0 };
    vec![
        ProblemSpec {
            name: "single_soliton",
            dim: 1,
            lower: [-30.0, 0.0],
            upper: [70.0, 0.0],
            beta: -1.0,
            kinetic: 1.0,
            potential: Potential::Zero,
            initial: InitialState::Exact,
            final_time: 10.0,
            exact: Some(ExactSolution::SingleSoliton),
            elements: [pick(4096, 8192), 0],
            n_steps: pick(640, 2560),
        },
        ProblemSpec {
            name: "two_soliton",
            dim: 1,
            lower: [-20.0, 0.0],
            upper: [20.0, 0.0],
            beta: -2.0,
            kinetic: 1.0,
            potential: Potential::Zero,
            initial: InitialState::Exact,
            final_time: 2.0,
            exact: Some(ExactSolution::TwoSoliton),
            elements: [pick(8192, 51200), 0],
            n_steps: pick(512, 2048),
        },
        // The domain [-16, 16] with h close to 24/800 and 24/51200.
        ProblemSpec {
            name: "lattice1d",
            dim: 1,
            lower: [-16.0, 0.0],
            upper: [16.0, 0.0],
            beta: 1000.0,
            kinetic: 0.5,
            potential: Potential::Lattice1d { gamma: 0.5, amplitude: 500.0 },
            initial: InitialState::GroundState { potential: lattice_gs, beta: 1000.0, omega: 0.0 },
            final_time: 5.0,
            exact: None,
            elements: [pick(1067, 68267), 0],
            n_steps: pick(5 * 1024, 5 * 4096),
        },
        ProblemSpec {
            name: "lattice2d",
            dim: 2,
            lower: [-6.0, -6.0],
            upper: [6.0, 6.0],
            beta: 2300.0,
            kinetic: 0.5,
            potential: Potential::FramedLattice { gamma: [4.0, 8.0] },
            initial: InitialState::GroundState {
                potential: Potential::FramedLattice { gamma: [1.0, 1.0] },
                beta: 2300.0,
                omega: 0.0,
            },
            final_time: 1.0,
            exact: None,
            elements: if paper { [200, 200] } else { [100, 100] },
            n_steps: pick(256, 1024),
        },
        ProblemSpec {
            name: "rotating",
            dim: 2,
            lower: [-6.0, -6.0],
            upper: [6.0, 6.0],
            beta: 100.0,
            kinetic: 0.5,
            potential: Potential::Quadratic { coeffs: [0.45, 0.55] },
            initial: InitialState::GroundState {
                potential: Potential::Quadratic { coeffs: [0.5, 0.5] },
                beta: 100.0,
                omega: 0.8,
            },
            final_time: 10.0,
            exact: None,
            elements: [64, 64],
            n_steps: 256,
        },
        ProblemSpec {
            name: "mott",
            dim: 2,
            lower: if paper { [-20.0, -20.0] } else { [-10.0, -10.0] },
            upper: if paper { [20.0, 20.0] } else { [10.0, 10.0] },
            beta: 1000.0,
            kinetic: 0.5,
            potential: Potential::Quadratic { coeffs: [2.0, 2.0] },
            initial: InitialState::GroundState {
                potential: Potential::MottLattice { trap: 2.0, lattice: 2000.0 },
                beta: 1000.0,
                omega: 0.0,
            },
            final_time: 0.515,
            exact: None,
            elements: if paper { [4000, 4000] } else { [400, 400] },
            n_steps: 2048,
        },
    ]
}

/// Catalog lookup by name.
pub fn problem(name: &str, profile: Profile) -> Result<ProblemSpec> {
    problem_catalog(profile)
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::Unknown { kind: "problem", name: name.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{energy, mass};
    use proptest::prelude::*;

    type C = Complex<f64>;

    #[test]
    fn single_soliton_values() {
        assert!((exact_single_soliton(0.0, 0.0) - C::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
        for t in [0.3, 1.7, 9.0] {
            let u = exact_single_soliton(t, t);
            assert!((u.norm() - 2f64.sqrt()).abs() < 1e-14);
            assert!((u - C::from_polar(2f64.sqrt(), 1.25 * t)).norm() < 1e-13);
        }
    }

    #[test]
    fn two_soliton_value_at_origin() {
        let u = exact_two_soliton(0.0, 0.0);
        assert!((u - C::new(-216.0 / 37.0, 0.0)).norm() < 1e-13);
        // both scaling branches agree at the seam
        let a = exact_two_soliton(1e-12, 0.4);
        let b = exact_two_soliton(-1e-12, 0.4);
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn two_soliton_is_finite_far_out() {
        for x in [-60.0f64, -20.0, 20.0, 60.0] {
            let u = exact_two_soliton(x, 1.0);
            assert!(u.norm().is_finite() && u.norm() < 1e-10);
        }
        let u32 = exact_two_soliton(20.0f32, 1.0);
        assert!(u32.norm().is_finite());
    }

    #[test]
    fn two_soliton_density_period() {
        let p = std::f64::consts::PI / 6.0;
        for i in 0..41 {
            let x = -4.0 + 0.2 * i as f64;
            for t in [0.0, 0.13, 1.1] {
                let a = exact_two_soliton(x, t).norm();
                let b = exact_two_soliton(x, t + p).norm();
                assert!((a - b).abs() < 1e-12 * a.max(1.0), "x={x} t={t}");
            }
        }
    }

    /// Residual of `i u_t + k u_xx - beta |u|^2 u` by central differences.
    fn pde_residual(sol: ExactSolution, beta: f64, x: f64, t: f64) -> f64 {
        let dt = 1e-5;
        let dx = 1e-5;
        let ut = (sol.value(&[x], t + dt) - sol.value(&[x], t - dt)) / (2.0 * dt);
        let uxx = (sol.derivative(&[x + dx], t) - sol.derivative(&[x - dx], t)) / (2.0 * dx);
        let u = sol.value(&[x], t);
        let r = C::i() * ut + uxx - u * (beta * u.norm_sqr());
        r.norm() / (1.0 + u.norm())
    }

    #[test]
    fn closed_forms_solve_the_pde() {
        for &(x, t) in &[(0.0, 0.0), (0.7, 0.2), (-1.3, 1.1), (2.5, 3.0)] {
            let r1 = pde_residual(ExactSolution::SingleSoliton, -1.0, x, t);
            let r2 = pde_residual(ExactSolution::TwoSoliton, -2.0, x, t);
            assert!(r1 < 1e-6, "single at ({x},{t}): {r1}");
            assert!(r2 < 1e-6, "two at ({x},{t}): {r2}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for sol in [ExactSolution::SingleSoliton, ExactSolution::TwoSoliton] {
            for &(x, t) in &[(0.3, 0.1), (-2.0, 0.9), (4.0, 0.0)] {
                let h = 1e-6;
                let fd = (sol.value(&[x + h], t) - sol.value(&[x - h], t)) / (2.0 * h);
                let d = sol.derivative(&[x], t);
                assert!((fd - d).norm() < 1e-7 * (1.0 + d.norm()), "{sol:?} {x}");
            }
        }
    }

    #[test]
    fn two_soliton_mass_and_energy() {
        let spec = problem("two_soliton", Profile::Paper).unwrap();
        let ops = spec.operators::<f64>(spec.mesh().unwrap()).unwrap();
        let u = spec.exact_initial(ops.mesh()).unwrap();
        let e = energy(&ops, &u, -2.0).unwrap();
        assert!((e + 48.0).abs() < 0.5, "{e}");
        assert!((mass(&ops.mass, &u).unwrap() - 12.0).abs() < 1e-3);
    }

    #[test]
    fn potential_examples() {
        let lat = Potential::from_name("lattice1d", &[0.5]).unwrap();
        assert_eq!(lat.eval(&[0.0f64]), 0.0);
        assert!((lat.eval(&[2.0f64]) - 501.0).abs() < 1e-10);
        let frame = Potential::FramedLattice { gamma: [0.0, 0.0] };
        // the lattice part vanishes at even coordinates, so test the frame alone
        let lattice = |x: f64| 787.0 * (std::f64::consts::PI * x / 2.0).sin().powi(2);
        assert!((frame.eval(&[4.5f64, 0.0]) - lattice(4.5)).abs() < 1e-9);
        assert!((frame.eval(&[5.5f64, 0.0]) - lattice(5.5) - 1000.0).abs() < 1e-9);
        let rot = Potential::from_name("quadratic", &[0.45, 0.55]).unwrap();
        assert!((rot.eval(&[1.0f64, 1.0]) - 1.0).abs() < 1e-15);
        let mott = Potential::from_name("mott", &[]).unwrap();
        assert!((mott.eval(&[0.25f64, 0.0]) - (0.125 + 2000.0)).abs() < 1e-9);
        assert!(Potential::from_name("nope", &[]).is_err());
        assert!(Potential::from_name("harmonic", &[1.0, 2.0]).is_err());
    }

    #[test]
    fn catalog_constants() {
        for profile in [Profile::Desk, Profile::Paper] {
            let cat = problem_catalog(profile);
            assert_eq!(cat.len(), 6);
            let betas: Vec<f64> = cat.iter().map(|p| p.beta).collect();
            assert_eq!(betas, vec![-1.0, -2.0, 1000.0, 2300.0, 100.0, 1000.0]);
            for p in &cat {
                p.validate().unwrap();
            }
        }
        let s = problem("single_soliton", Profile::Desk).unwrap();
        assert_eq!((s.lower[0], s.upper[0], s.beta, s.final_time), (-30.0, 70.0, -1.0, 10.0));
        assert_eq!(s.tau(), 1.0 / 64.0);
        let l = problem("lattice1d", Profile::Desk).unwrap();
        assert_eq!(l.potential, Potential::Lattice1d { gamma: 0.5, amplitude: 500.0 });
        let h = l.mesh::<f64>().unwrap().h();
        assert!((h - 24.0 / 800.0).abs() < 1e-4);
        let m = problem("mott", Profile::Paper).unwrap();
        assert!((m.tau() - 0.515 / 2048.0).abs() < 1e-18);
        assert!(((m.upper[0] - m.lower[0]) / m.elements[0] as f64 - 0.01).abs() < 1e-15);
        let md = problem("mott", Profile::Desk).unwrap();
        assert!(((md.upper[0] - md.lower[0]) / md.elements[0] as f64 - 0.05).abs() < 1e-15);
        assert!((md.elements[0] + 1) * (md.elements[1] + 1) <= 300_000);
        let r = problem("rotating", Profile::Desk).unwrap();
        // catalog mesh sizes are grid spacings, not triangle diameters
        assert_eq!((r.upper[0] - r.lower[0]) / r.elements[0] as f64, 12.0 / 64.0);
        let l2 = problem("lattice2d", Profile::Paper).unwrap();
        assert!(((l2.upper[0] - l2.lower[0]) / l2.elements[0] as f64 - 0.06).abs() < 1e-12);
        assert!(problem("nope", Profile::Desk).is_err());
    }

    #[test]
    fn validation_catches_inconsistency() {
        let mut p = problem("rotating", Profile::Desk).unwrap();
        p.exact = Some(ExactSolution::SingleSoliton);
        assert!(p.validate().is_err());
        let mut q = problem("lattice1d", Profile::Desk).unwrap();
        q.initial = InitialState::GroundState { potential: Potential::Zero, beta: 0.0, omega: 0.5 };
        assert!(q.validate().is_err());
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("Paper".parse::<Profile>().unwrap(), Profile::Paper);
        assert!("huge".parse::<Profile>().is_err());
    }

    proptest! {
        #[test]
        fn soliton_modulus_travels(x in -20.0f64..20.0, t in 0.0f64..10.0) {
            let a = exact_single_soliton(x, 0.0).norm();
            let b = exact_single_soliton(x + t, t).norm();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn two_soliton_stays_below_peak(x in -15.0f64..15.0, t in 0.0f64..3.0) {
            // the peak modulus is the sum of the two amplitudes, 2 + 4
            let u = exact_two_soliton(x, t);
            prop_assert!(u.norm() <= 6.0 + 1e-9);
        }
    }
}
