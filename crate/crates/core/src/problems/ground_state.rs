//! Ground states by the semi-implicit discrete normalized gradient flow
//!
//! `(M/tau + k A + M_V + beta W(|u_k|^2) - omega L) u* = M u_k / tau`,
//! `u_{k+1} = u* / |u*|_M`.

use num_complex::Complex;
use num_traits::{Float, Zero};

use crate::assembly::{assemble_angular_momentum, interpolate_nodal, sample_density, Operators, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{solve, SolverOptions};
use crate::mesh::Mesh;
use crate::scalar::{dot, Real, Scalar};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy)]
pub struct GroundStateOptions {
    /// Pseudo-time step.
    pub tau: f64,
    /// Stop when `|u_{k+1} - u_k|_M / tau` falls below this.
    pub tol: f64,
    /// Iteration cap over all continuation stages.
    pub max_iter: usize,
    /// Number of interaction stages `beta/s, 2 beta/s, .., beta` used when
    /// `|beta| >= continuation_threshold`.
    pub stages: usize,
    pub continuation_threshold: f64,
    /// Update tolerance of the intermediate stages.
    pub stage_tol: f64,
    pub solver: SolverOptions,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            tau: 0.01,
            tol: 1e-8,
            max_iter: 50_000,
            stages: 5,
            continuation_threshold: 1000.0,
            stage_tol: 1e-4,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult<T> {
    /// Normalized so that `<M u, u> = 1`.
    pub state: StateVector<T>,
    /// Chemical potential: the Rayleigh quotient of the nonlinear
    /// Hamiltonian, with the full `beta int |u|^4`.
    pub eigenvalue: T,
    /// Final update `|u_{k+1} - u_k|_M / tau`.
    pub residual: T,
    /// `|H(u) u - lambda M u|` in the lumped `M^{-1}` norm.
    pub eigen_residual: T,
    pub iterations: usize,
    /// Gradient-flow energy after each iteration of the final stage.
    pub energies: Vec<T>,
}

/// `exp(-|x|^2/2)`, seeded with a vortex `(x + iy)` for `omega != 0`,
/// zero on the boundary and not normalized.
pub fn gaussian_guess<T: Real>(mesh: &Mesh<T>, omega: T) -> StateVector<T> {
    let half = T::lit(0.5);
    interpolate_nodal(
        mesh,
        |x| {
            let r2: T = x.iter().map(|&c| c * c).sum();
            let g = (-half * r2).exp();
            if omega != T::zero() && x.len() == 2 {
                (Complex::new(T::one() - omega, T::zero()) + Complex::new(x[0], x[1]) * omega) * g
            } else {
                Complex::new(g, T::zero())
            }
        },
        true,
    )
}

fn lumped<T: Real>(m: &CsrMatrix<T>) -> Vec<T> {
    (0..m.dim()).map(|i| m.row_iter(i).map(|(_, v)| v).sum()).collect()
}

fn m_norm<S: Scalar>(m: &CsrMatrix<S>, u: &[S]) -> Result<S::Real> {
    let mu = m.matvec(u)?;
    Ok(dot(&mu, u).re().max(S::Real::zero()).sqrt())
}

fn angular_term<T: Real>(l: Option<&CsrMatrix<Complex<T>>>, u: &[Complex<T>]) -> Result<T> {
    match l {
        None => Ok(T::zero()),
        Some(l) => Ok(dot(&l.matvec(u)?, u).re),
    }
}

fn energy_with<T: Real>(
    ops: &Operators<T>,
    l: Option<&CsrMatrix<Complex<T>>>,
    u: &[Complex<T>],
    beta: T,
    omega: T,
) -> Result<T> {
    let quad = ops.hamiltonian.quadratic_form(u)?;
    let quartic = if beta == T::zero() { T::zero() } else { ops.quartic_integral(u)? };
    Ok(quad + T::lit(0.5) * beta * quartic - omega * angular_term(l, u)?)
}

/// `k <A u, u> + <M_V u, u> + beta/2 int |u|^4 - omega <L u, u>`, the
/// functional the gradient flow decreases.
pub fn ground_state_energy<T: Real>(ops: &Operators<T>, u: &[Complex<T>], beta: T, omega: T) -> Result<T> {
    let l = if omega != T::zero() { Some(assemble_angular_momentum(ops.space())?) } else { None };
    energy_with(ops, l.as_ref(), u, beta, omega)
}

struct Flow<'a, T: Real> {
    ops: &'a Operators<T>,
    omega: T,
    l: Option<&'a CsrMatrix<Complex<T>>>,
    opts: &'a GroundStateOptions,
}

struct StageOutcome<T> {
    update: T,
    iterations: usize,
    energies: Vec<T>,
}

impl<T: Real> Flow<'_, T> {
    fn run<S, B>(&self, u: &mut Vec<S>, beta: T, tol: T, budget: usize, lift: B) -> Result<StageOutcome<T>>
    where
        S: Scalar<Real = T>,
        B: Fn(CsrMatrix<T>) -> CsrMatrix<S>,
    {
        let ops = self.ops;
        let tau = T::lit(self.opts.tau);
        let inv_tau = T::one() / tau;
        let mask = ops.boundary_mask();
        let m_s: CsrMatrix<S> = ops.mass.map(S::from_real);
        let mut energies = Vec::new();
        let mut update = T::infinity();
        for it in 1..=budget {
            let uc: Vec<Complex<T>> = u.iter().map(|z| z.into_complex()).collect();
            let rho = sample_density(ops.space(), &uc)?;
            let h = ops.density_hamiltonian(Some(&rho), beta)?;
            let mut sys = lift(ops.mass.add_scaled(&h, inv_tau, T::one())?);
            sys.apply_dirichlet(mask);
            let mut rhs = m_s.matvec(u)?;
            for (r, &b) in rhs.iter_mut().zip(mask) {
                *r = if b { S::zero() } else { r.scale(inv_tau) };
            }
            let (mut next, _) = solve(&sys, &rhs, &self.opts.solver)?;
            let norm = m_norm(&m_s, &next)?;
            if !(norm > T::zero()) || !norm.is_finite() {
                return Err(Error::NonFinite("gradient flow state"));
            }
            let inv = T::one() / norm;
            next.iter_mut().for_each(|z| *z = z.scale(inv));
            let diff: Vec<S> = next.iter().zip(u.iter()).map(|(&a, &b)| a - b).collect();
            update = m_norm(&m_s, &diff)? * inv_tau;
            *u = next;
            let uc: Vec<Complex<T>> = u.iter().map(|z| z.into_complex()).collect();
            energies.push(energy_with(ops, self.l, &uc, beta, self.omega)?);
            if update <= tol {
                return Ok(StageOutcome { update, iterations: it, energies });
            }
        }
        Err(Error::GroundStateNotConverged { iterations: budget, update: update.to_f64_lossy() })
    }
}

/// Ground state of `-k Lap + V + beta |u|^2 - omega L` with `k` and `V`
/// taken from `ops`.
///
/// Interactions with `|beta| >= opts.continuation_threshold` are ramped up
/// in `opts.stages` stages. Without rotation and with a real initial guess
/// the iteration runs in real arithmetic.
pub fn ground_state<T: Real>(
    ops: &Operators<T>,
    beta: T,
    omega: T,
    guess: Option<&[Complex<T>]>,
    opts: &GroundStateOptions,
) -> Result<GroundStateResult<T>> {
    if omega != T::zero() && ops.mesh().dim() != 2 {
        return Err(Error::InvalidArgument("rotation needs a 2D mesh".into()));
    }
    if !(opts.tau > 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 || opts.stages == 0 {
        return Err(Error::InvalidArgument("gradient flow needs positive tau, tol, max_iter and stages".into()));
    }
    let mut u0: StateVector<T> = match guess {
        Some(g) => {
            ops.check_state(g)?;
            g.to_vec()
        }
        None => gaussian_guess(ops.mesh(), omega),
    };
    ops.zero_boundary(&mut u0);
    let l = if omega != T::zero() { Some(assemble_angular_momentum(ops.space())?) } else { None };
    let flow = Flow { ops, omega, l: l.as_ref(), opts };

    let betas: Vec<T> = if beta.abs().to_f64_lossy() >= opts.continuation_threshold && opts.stages > 1 {
        let s = T::from_usize_lossy(opts.stages);
        (1..=opts.stages).map(|j| beta * T::from_usize_lossy(j) / s).collect()
    } else {
        vec![beta]
    };
    let real_path = omega == T::zero() && u0.iter().all(|z| z.im == T::zero());
    let mut total = 0;
    let mut outcome = None;
    let mut state = u0;
    let mut real_state: Vec<T> = state.iter().map(|z| z.re).collect();
    for (k, &b) in betas.iter().enumerate() {
        let tol = T::lit(if k + 1 == betas.len() { opts.tol } else { opts.stage_tol.max(opts.tol) });
        let budget = opts.max_iter - total;
        if budget == 0 {
            return Err(Error::GroundStateNotConverged { iterations: total, update: f64::INFINITY });
        }
        let out = if real_path {
            flow.run(&mut real_state, b, tol, budget, |m| m)
        } else {
            let lmat = l.as_ref();
            flow.run(&mut state, b, tol, budget, |m| {
                let c = m.to_complex();
                match lmat {
                    Some(l) => c.add_scaled(l, Complex::new(T::one(), T::zero()), Complex::new(-omega, T::zero())).expect("shared pattern"),
                    None => c,
                }
            })
        }
        .map_err(|e| match e {
            Error::GroundStateNotConverged { update, .. } => Error::GroundStateNotConverged { iterations: opts.max_iter, update },
            e => e,
        })?;
        total += out.iterations;
        outcome = Some(out);
    }
    if real_path {
        state = real_state.iter().map(|&r| Complex::new(r, T::zero())).collect();
    }
    let out = outcome.expect("at least one stage");

    let rho = sample_density(ops.space(), &state)?;
    let h = ops.density_hamiltonian(Some(&rho), beta)?;
    let hu = h.matvec_complex(&state)?;
    let lu = match &l {
        Some(l) => l.matvec(&state)?,
        None => vec![Complex::new(T::zero(), T::zero()); state.len()],
    };
    let num = dot(&hu, &state).re - omega * dot(&lu, &state).re;
    let den = ops.mass.quadratic_form(&state)?;
    let lambda = num / den;
    let mu = ops.mass.matvec_complex(&state)?;
    let ml = lumped(&ops.mass);
    let mut r2 = T::zero();
    for i in 0..state.len() {
        if !ops.boundary_mask()[i] {
            let r = hu[i] - lu[i] * omega - mu[i] * lambda;
            r2 += r.norm_sqr() / ml[i];
        }
    }
    Ok(GroundStateResult {
        state,
        eigenvalue: lambda,
        residual: out.update,
        eigen_residual: r2.sqrt(),
        iterations: total,
        energies: out.energies,
    })
}

/// Number of cells of a structured 2D mesh around which the phase winds,
/// counting only cells where the density exceeds `density_fraction` times
/// its maximum.
pub fn count_vortices<T: Real>(mesh: &Mesh<T>, u: &[Complex<T>], density_fraction: T) -> Result<usize> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidArgument("vortex counting needs a 2D mesh".into()));
    }
    if u.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch { expected: mesh.n_nodes(), got: u.len() });
    }
    let (nx, ny) = mesh.resolution();
    let rho_max = u.iter().map(|z| z.norm_sqr()).fold(T::zero(), T::max);
    let cut = density_fraction * rho_max;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let two_pi = T::lit(2.0) * T::PI();
    let mut count = 0;
    for j in 0..ny {
        for i in 0..nx {
            let ring = [u[id(i, j)], u[id(i + 1, j)], u[id(i + 1, j + 1)], u[id(i, j + 1)]];
            if ring.iter().map(|z| z.norm_sqr()).fold(T::zero(), T::max) < cut {
                continue;
            }
            if ring.iter().any(|z| z.norm_sqr() == T::zero()) {
                continue;
            }
            let mut winding = T::zero();
            for k in 0..4 {
                winding += (ring[(k + 1) % 4] / ring[k]).arg();
            }
            if (winding / two_pi).round() != T::zero() {
                count += 1;
            }
        }
    }
    Ok(count)
}
