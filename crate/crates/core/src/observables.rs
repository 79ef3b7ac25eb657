//! Mass, energy, the relaxation pseudo-energy, error norms and
//! empirical convergence orders.

use num_complex::Complex;

use crate::assembly::{evaluate_at_quadrature, sample_density, Operators};
use crate::error::{Error, Result};
use crate::quadrature::{P1Space, QuadDensity};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::steppers::{relaxation_density, Memory, StepperState};

/// `<M u, u>`
pub fn mass<T: Real>(m: &CsrMatrix<T>, u: &[Complex<T>]) -> Result<T> {
    m.quadratic_form(u)
}

/// `k <A u, u> + <M_V u, u> + beta/2 int |u|^4`
pub fn energy<T: Real>(ops: &Operators<T>, u: &[Complex<T>], beta: T) -> Result<T> {
    let quad = ops.hamiltonian.quadratic_form(u)?;
    if beta == T::zero() {
        return Ok(quad);
    }
    Ok(quad + T::lit(0.5) * beta * ops.quartic_integral(u)?)
}

/// `k <A u, u> + <M_V u, u> + beta/2 int rho_next rho_prev`
pub fn re_pseudo_energy<T: Real>(
    ops: &Operators<T>,
    u: &[Complex<T>],
    rho_next: &QuadDensity<T>,
    rho_prev: &QuadDensity<T>,
    beta: T,
) -> Result<T> {
    rho_next.check_layout(ops.space())?;
    rho_prev.check_layout(ops.space())?;
    let quad = ops.hamiltonian.quadratic_form(u)?;
    Ok(quad + T::lit(0.5) * beta * ops.density_product(rho_next, rho_prev))
}

/// Pseudo-energy of a relaxation state at its current level, or `None`
/// for schemes without a relaxation density.
pub fn state_pseudo_energy<T: Real>(ops: &Operators<T>, state: &StepperState<T>, beta: T) -> Result<Option<T>> {
    let Memory::Density(rho_prev) = &state.memory else {
        return Ok(None);
    };
    let rho_next = relaxation_density(ops, &state.u, rho_prev)?;
    re_pseudo_energy(ops, &state.u, &rho_next, rho_prev, beta).map(Some)
}

/// A pointwise function with its gradient, such as an exact solution at a
/// fixed time.
pub trait PointwiseField<T> {
    fn value(&self, x: &[T]) -> Complex<T>;
    fn gradient(&self, x: &[T], grad: &mut [Complex<T>]);
}

/// What a numerical solution is compared against.
pub enum Reference<'a, T> {
    /// Evaluated at quadrature points.
    Exact(&'a dyn PointwiseField<T>),
    /// Nodal coefficients on the same mesh.
    Discrete(&'a [Complex<T>]),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms<T> {
    pub l2: T,
    /// Full norm, including the L2 part.
    pub h1: T,
    /// `int ||u|^2 - |u_ref|^2|`
    pub l1_density: T,
}

/// L2, H1 and L1-density errors by element quadrature.
pub fn error_norms<T: Real>(space: &P1Space<T>, u: &[Complex<T>], reference: Reference<'_, T>) -> Result<ErrorNorms<T>> {
    let n = space.n_dofs();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u.len() });
    }
    if let Reference::Discrete(r) = &reference {
        if r.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
    }
    let d = space.dim();
    let k = d + 1;
    let nq = space.rule.n_points();
    let zero = Complex::new(T::zero(), T::zero());
    let uq = evaluate_at_quadrature(space, u);
    let rq = match &reference {
        Reference::Discrete(r) => Some(evaluate_at_quadrature(space, r)),
        Reference::Exact(_) => None,
    };
    let (mut l2, mut semi, mut l1) = (T::zero(), T::zero(), T::zero());
    let mut grad_u = vec![zero; d];
    let mut grad_r = vec![zero; d];
    for e in 0..space.mesh().n_cells() {
        let cell = space.mesh().cell(e);
        grad_u.iter_mut().for_each(|g| *g = zero);
        for a in 0..k {
            let g = space.grad(e, a);
            for c in 0..d {
                grad_u[c] += u[cell[a]] * g[c];
            }
        }
        if let Reference::Discrete(r) = &reference {
            grad_r.iter_mut().for_each(|g| *g = zero);
            for a in 0..k {
                let g = space.grad(e, a);
                for c in 0..d {
                    grad_r[c] += r[cell[a]] * g[c];
                }
            }
        }
        for q in 0..nq {
            let idx = e * nq + q;
            let w = space.qweight(e, q);
            let rv = match (&reference, &rq) {
                (Reference::Exact(f), _) => {
                    let x = space.qpoint(e, q);
                    f.gradient(x, &mut grad_r);
                    f.value(x)
                }
                (_, Some(rq)) => rq[idx],
                _ => unreachable!(),
            };
            let err = uq[idx] - rv;
            l2 += w * err.norm_sqr();
            for c in 0..d {
                semi += w * (grad_u[c] - grad_r[c]).norm_sqr();
            }
            l1 += w * (uq[idx].norm_sqr() - rv.norm_sqr()).abs();
        }
    }
    Ok(ErrorNorms { l2: l2.sqrt(), h1: (l2 + semi).sqrt(), l1_density: l1 })
}

/// `log(e_k / e_{k+1}) / log(tau_k / tau_{k+1})`; `None` where an error
/// vanishes.
pub fn eoc(errors: &[f64], taus: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != taus.len() {
        return Err(Error::DimensionMismatch { expected: taus.len(), got: errors.len() });
    }
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("need at least two resolutions".into()));
    }
    if taus.windows(2).any(|w| !(w[1] < w[0]) || !(w[1] > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive and strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| {
            if e[0] > 0.0 && e[1] > 0.0 && e[0].is_finite() && e[1].is_finite() {
                Some((e[0] / e[1]).ln() / (t[0] / t[1]).ln())
            } else {
                None
            }
        })
        .collect())
}

/// One row of a run's observable trace.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservableSample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub pseudo_energy: Option<f64>,
    pub errors: Option<ErrorNorms<f64>>,
    /// Wall time since the run started.
    pub wall_s: f64,
    pub blown_up: bool,
}

/// Mass and energy (and the pseudo-energy for relaxation states) of a state.
pub fn sample_state<T: Real>(ops: &Operators<T>, state: &StepperState<T>, beta: T) -> Result<ObservableSample> {
    let m = mass(&ops.mass, &state.u)?.to_f64_lossy();
    let e = energy(ops, &state.u, beta)?.to_f64_lossy();
    let pe = state_pseudo_energy(ops, state, beta)?.map(|v| v.to_f64_lossy());
    Ok(ObservableSample { t: state.t.to_f64_lossy(), mass: m, energy: e, pseudo_energy: pe, ..Default::default() })
}

/// `int |u|^2` of a discrete state via its sampled density.
pub fn density_mass<T: Real>(space: &P1Space<T>, u: &[Complex<T>]) -> Result<T> {
    Ok(space.integrate(&sample_density(space, u)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::interpolate_nodal;
    use crate::mesh::Mesh;
    use proptest::prelude::*;

    type C = Complex<f64>;

    struct Soliton;

    impl PointwiseField<f64> for Soliton {
        fn value(&self, x: &[f64]) -> C {
            C::from_polar(2f64.sqrt() / x[0].cosh(), x[0] / 2.0)
        }
        fn gradient(&self, x: &[f64], g: &mut [C]) {
            g[0] = self.value(x) * C::new(-x[0].tanh(), 0.5);
        }
    }

    fn soliton_ops(n: usize) -> Operators<f64> {
        Operators::free(P1Space::new(Mesh::<f64>::interval(-30.0, 70.0, n).unwrap()), 1.0).unwrap()
    }

    #[test]
    fn mass_and_energy_of_zero_vanish() {
        let ops = soliton_ops(16);
        let z = vec![C::new(0.0, 0.0); 17];
        assert_eq!(mass(&ops.mass, &z).unwrap(), 0.0);
        assert_eq!(energy(&ops, &z, -1.0).unwrap(), 0.0);
        let rho = sample_density(ops.space(), &z).unwrap();
        assert_eq!(re_pseudo_energy(&ops, &z, &rho, &rho, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn soliton_mass_and_energy() {
        let ops = soliton_ops(8192);
        let u = interpolate_nodal(ops.mesh(), |x| Soliton.value(x), true);
        let m = mass(&ops.mass, &u).unwrap();
        assert!((m - 4.0).abs() < 1e-3, "{m}");
        let u2: Vec<C> = u.iter().map(|z| z * 2.0).collect();
        assert!((mass(&ops.mass, &u2).unwrap() - 4.0 * m).abs() < 1e-12);
        let e = energy(&ops, &u, -1.0).unwrap();
        assert!((e + 1.0 / 3.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn pseudo_energy_collapses_to_energy() {
        let ops = soliton_ops(512);
        let u = interpolate_nodal(ops.mesh(), |x| Soliton.value(x), true);
        let rho = sample_density(ops.space(), &u).unwrap();
        let a = re_pseudo_energy(&ops, &u, &rho, &rho, -1.0).unwrap();
        let b = energy(&ops, &u, -1.0).unwrap();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn error_norms_against_self_and_exact() {
        let ops = soliton_ops(4096);
        let sp = ops.space();
        let u = interpolate_nodal(ops.mesh(), |x| Soliton.value(x), true);
        let z = error_norms(sp, &u, Reference::Discrete(&u)).unwrap();
        assert_eq!((z.l2, z.h1, z.l1_density), (0.0, 0.0, 0.0));
        let e = error_norms(sp, &u, Reference::Exact(&Soliton)).unwrap();
        // interpolation error: O(h^2) in L2, O(h) in H1
        let h = 100.0 / 4096.0;
        assert!(e.l2 < h * h && e.h1 < 2.0 * h && e.l1_density < h * h, "{e:?}");
        assert!(error_norms(sp, &u[1..], Reference::Exact(&Soliton)).is_err());
    }

    #[test]
    fn error_norms_are_homogeneous() {
        let ops = soliton_ops(10);
        let mut hat = vec![C::new(0.0, 0.0); 11];
        hat[4] = C::new(1.0, 0.0);
        let z = vec![C::new(0.0, 0.0); 11];
        let e1 = error_norms(ops.space(), &hat, Reference::Discrete(&z)).unwrap();
        let scaled: Vec<C> = hat.iter().map(|v| v * C::new(0.0, -3.0)).collect();
        let e3 = error_norms(ops.space(), &scaled, Reference::Discrete(&z)).unwrap();
        assert!((e3.l2 - 3.0 * e1.l2).abs() < 1e-12);
        assert!((e3.h1 - 3.0 * e1.h1).abs() < 1e-12);
        assert!((e3.l1_density - 9.0 * e1.l1_density).abs() < 1e-12);
        // hat on h = 10: int hat^2 = 2h/3, int |hat'|^2 = 2/h
        assert!((e1.l2 - (20.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((e1.h1 - (20.0f64 / 3.0 + 0.2).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn eoc_examples() {
        let taus = [0.1, 0.05, 0.025];
        let quad: Vec<f64> = taus.iter().map(|t| 3.0 * t * t).collect();
        let lin: Vec<f64> = taus.iter().map(|t| 0.5 * t).collect();
        for r in eoc(&quad, &taus).unwrap() {
            assert!((r.unwrap() - 2.0).abs() < 1e-12);
        }
        for r in eoc(&lin, &taus).unwrap() {
            assert!((r.unwrap() - 1.0).abs() < 1e-12);
        }
        assert_eq!(eoc(&[1.0, 0.0], &[0.1, 0.05]).unwrap(), vec![None]);
        assert!(eoc(&[1.0], &[0.1]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.1, 0.2]).is_err());
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
        #[test]
        fn energy_is_phase_invariant(seed in 0u64..1000, theta in 0.0f64..6.3, beta in -3.0f64..3.0) {
            let ops = soliton_ops(20);
            let u = random_state(21, seed);
            let v: Vec<C> = u.iter().map(|z| z * C::from_polar(1.0, theta)).collect();
            let a = energy(&ops, &u, beta).unwrap();
            let b = energy(&ops, &v, beta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn error_norms_obey_triangle_inequality(seed in 0u64..1000) {
            let ops = soliton_ops(20);
            let sp = ops.space();
            let (a, b, c) = (random_state(21, seed), random_state(21, seed + 1), random_state(21, seed + 2));
            let ab = error_norms(sp, &a, Reference::Discrete(&b)).unwrap();
            let bc = error_norms(sp, &b, Reference::Discrete(&c)).unwrap();
            let ac = error_norms(sp, &a, Reference::Discrete(&c)).unwrap();
            prop_assert!(ab.l2 >= 0.0 && ab.h1 >= ab.l2 && ab.l1_density >= 0.0);
            prop_assert!(ac.l2 <= ab.l2 + bc.l2 + 1e-12);
            prop_assert!(ac.h1 <= ab.h1 + bc.h1 + 1e-12);
        }
    }
}
