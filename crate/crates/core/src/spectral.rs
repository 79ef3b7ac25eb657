//! Second-order Strang splitting with a Fourier pseudo-spectral kinetic
//! part on a periodic 1D grid. Used as the comparison method for the
//! two-soliton blow-up experiments.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftNum, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform periodic grid on `[a, b)` with `n` points.
#[derive(Debug, Clone)]
pub struct PeriodicGrid<T> {
    pub a: T,
    pub b: T,
    pub n: usize,
    pub dx: T,
    /// Angular wavenumbers in FFT order: `0, 1, .., n/2 - 1, -n/2, .., -1`
    /// times `2 pi / L`.
    pub wavenumbers: Vec<T>,
}

impl<T: Real> PeriodicGrid<T> {
    pub fn new(a: T, b: T, n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("grid size {n} must be a power of two >= 4")));
        }
        if !(b > a) {
            return Err(Error::InvalidArgument("empty periodic interval".into()));
        }
        let len = b - a;
        let dx = len / T::from_usize_lossy(n);
        let base = T::lit(2.0) * T::PI() / len;
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                base * T::lit(m)
            })
            .collect();
        Ok(Self { a, b, n, dx, wavenumbers })
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n).map(|j| self.a + self.dx * T::from_usize_lossy(j)).collect()
    }

    pub fn sample<F: Fn(T) -> Complex<T>>(&self, f: F) -> Vec<Complex<T>> {
        self.points().into_iter().map(f).collect()
    }

    /// Rectangle-rule mass, exact for trigonometric polynomials.
    pub fn mass(&self, u: &[Complex<T>]) -> T {
        self.dx * u.iter().map(|z| z.norm_sqr()).sum::<T>()
    }
}

/// Strang splitting propagator with cached FFT plans.
pub struct SplitStep<T: FftNum> {
    grid: PeriodicGrid<T>,
    kinetic: T,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real + FftNum> SplitStep<T> {
    pub fn new(grid: PeriodicGrid<T>, kinetic: T) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let scratch = vec![Complex::new(T::zero(), T::zero()); forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len())];
        Self { grid, kinetic, forward, inverse, scratch }
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    fn check(&self, u: &[Complex<T>], v: &[T]) -> Result<()> {
        if u.len() != self.grid.n {
            return Err(Error::DimensionMismatch { expected: self.grid.n, got: u.len() });
        }
        if v.len() != self.grid.n {
            return Err(Error::DimensionMismatch { expected: self.grid.n, got: v.len() });
        }
        Ok(())
    }

    /// Multiply every Fourier mode by `exp(-i k |xi|^2 dt)`.
    fn kinetic_flow(&mut self, u: &mut [Complex<T>], dt: T) {
        self.forward.process_with_scratch(u, &mut self.scratch);
        let inv_n = T::one() / T::from_usize_lossy(self.grid.n);
        for (z, &xi) in u.iter_mut().zip(&self.grid.wavenumbers) {
            let phase = -self.kinetic * xi * xi * dt;
            *z = *z * Complex::from_polar(inv_n, phase);
        }
        self.inverse.process_with_scratch(u, &mut self.scratch);
    }

    /// One step: half kinetic flow, full potential and nonlinear phase
    /// rotation, half kinetic flow.
    pub fn step(&mut self, u: &mut [Complex<T>], tau: T, beta: T, v: &[T]) -> Result<()> {
        self.check(u, v)?;
        let half = tau * T::lit(0.5);
        self.kinetic_flow(u, half);
        for (z, &vx) in u.iter_mut().zip(v) {
            let phase = -(vx + beta * z.norm_sqr()) * tau;
            *z = *z * Complex::from_polar(T::one(), phase);
        }
        self.kinetic_flow(u, half);
        if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("split-step state"));
        }
        Ok(())
    }

    /// `k int |u'|^2 + int V |u|^2 + beta/2 int |u|^4` with the kinetic part
    /// evaluated spectrally.
    pub fn energy(&mut self, u: &[Complex<T>], beta: T, v: &[T]) -> Result<T> {
        self.check(u, v)?;
        let mut hat = u.to_vec();
        self.forward.process_with_scratch(&mut hat, &mut self.scratch);
        let n = T::from_usize_lossy(self.grid.n);
        let len = self.grid.b - self.grid.a;
        let kin: T = hat.iter().zip(&self.grid.wavenumbers).map(|(z, &xi)| xi * xi * z.norm_sqr()).sum::<T>() * len / (n * n);
        let half = T::lit(0.5);
        let pot: T = u
            .iter()
            .zip(v)
            .map(|(z, &vx)| {
                let r = z.norm_sqr();
                vx * r + half * beta * r * r
            })
            .sum::<T>()
            * self.grid.dx;
        Ok(self.kinetic * kin + pot)
    }
}

/// One-off split step; plans the transforms on every call.
pub fn sp2_step<T: Real + FftNum>(grid: &PeriodicGrid<T>, u: &mut [Complex<T>], tau: T, beta: T, v: &[T], kinetic: T) -> Result<()> {
    SplitStep::new(grid.clone(), kinetic).step(u, tau, beta, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ExactSolution;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn maxdiff(a: &[C], b: &[C]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(PeriodicGrid::<f64>::new(0.0, 1.0, 6).is_err());
        assert!(PeriodicGrid::<f64>::new(0.0, 1.0, 2).is_err());
        assert!(PeriodicGrid::<f64>::new(1.0, 0.0, 8).is_err());
    }

    #[test]
    fn wavenumbers_are_symmetric() {
        let g = PeriodicGrid::<f64>::new(0.0, 2.0 * std::f64::consts::PI, 8).unwrap();
        let want = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (k, w) in g.wavenumbers.iter().zip(want) {
            assert!((k - w).abs() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_gets_exact_phase() {
        let len = 2.0 * std::f64::consts::PI;
        let g = PeriodicGrid::new(0.0, len, 32).unwrap();
        let xi = 3.0;
        let mut u = g.sample(|x| C::from_polar(1.0, xi * x));
        let v = vec![0.0; 32];
        let tau = 0.37;
        SplitStep::new(g.clone(), 1.0).step(&mut u, tau, 0.0, &v).unwrap();
        let want = g.sample(|x| C::from_polar(1.0, xi * x - xi * xi * tau));
        assert!(maxdiff(&u, &want) < 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = PeriodicGrid::new(-20.0f64, 20.0, 256).unwrap();
        let u0 = g.sample(|x| C::new((-x * x).exp(), x.sin()));
        let mut u = u0.clone();
        let v: Vec<f64> = g.points().iter().map(|x| x * x).collect();
        SplitStep::new(g, 0.5).step(&mut u, 0.0, 3.0, &v).unwrap();
        assert!(maxdiff(&u, &u0) < 1e-13);
    }

    #[test]
    fn constant_state_rotates_by_nonlinear_phase() {
        let g = PeriodicGrid::new(0.0, 1.0, 16).unwrap();
        let mut u = vec![C::new(2.0, 0.0); 16];
        let v = vec![0.5; 16];
        SplitStep::new(g, 1.0).step(&mut u, 0.1, 1.5, &v).unwrap();
        let want = C::from_polar(2.0, -(0.5 + 1.5 * 4.0) * 0.1);
        assert!(u.iter().all(|z| (z - want).norm() < 1e-13));
    }

    #[test]
    fn two_soliton_energy_and_mass() {
        let g = PeriodicGrid::new(-20.0f64, 20.0, 2048).unwrap();
        let u = g.sample(|x| ExactSolution::TwoSoliton.value(&[x], 0.0));
        let v = vec![0.0; 2048];
        let mut sp = SplitStep::new(g.clone(), 1.0);
        let e = sp.energy(&u, -2.0, &v).unwrap();
        assert!((e + 48.0).abs() < 1e-6, "{e}");
        assert!((g.mass(&u) - 12.0).abs() < 1e-9);
    }

    #[test]
    fn free_function_matches_propagator() {
        let g = PeriodicGrid::new(-5.0f64, 5.0, 64).unwrap();
        let u0 = g.sample(|x| C::new((-x * x).exp(), 0.0));
        let v = vec![0.0; 64];
        let mut a = u0.clone();
        let mut b = u0;
        sp2_step(&g, &mut a, 0.01, 1.0, &v, 1.0).unwrap();
        SplitStep::new(g, 1.0).step(&mut b, 0.01, 1.0, &v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f32_step_runs() {
        let g = PeriodicGrid::<f32>::new(-4.0, 4.0, 64).unwrap();
        let mut u = g.sample(|x| Complex::new((-x * x).exp(), 0.0));
        let m0 = g.mass(&u);
        let v = vec![0.0f32; 64];
        let mut sp = SplitStep::new(g.clone(), 1.0);
        for _ in 0..10 {
            sp.step(&mut u, 0.01, -1.0, &v).unwrap();
        }
        assert!((g.mass(&u) - m0).abs() < 1e-4 * m0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mass_is_conserved(
            coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
            tau in 0.001f64..0.2,
            beta in -5.0f64..5.0,
        ) {
            let g = PeriodicGrid::new(0.0, 2.0 * std::f64::consts::PI, 64).unwrap();
            let mut u = g.sample(|x| {
                coeffs.iter().enumerate().map(|(k, &(a, b))| C::new(a, b) * C::from_polar(1.0, k as f64 * x)).sum()
            });
            let v: Vec<f64> = g.points().iter().map(|x| x.cos()).collect();
            let m0 = g.mass(&u);
            let mut sp = SplitStep::new(g.clone(), 1.0);
            for _ in 0..5 {
                sp.step(&mut u, tau, beta, &v).unwrap();
            }
            prop_assert!((g.mass(&u) - m0).abs() <= 1e-11 * m0.max(1.0));
        }
    }
}
