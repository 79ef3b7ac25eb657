//! Linear solves: banded LU with partial pivoting (default) and
//! Jacobi-preconditioned BiCGSTAB (fallback for very large systems).

use std::time::Instant;

use crate::error::{Error, Result};
use num_traits::Zero;

use crate::scalar::{dot, norm2, Real, Scalar};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Direct unless the banded factorization is estimated too expensive.
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub method: SolverMethod,
    /// Relative residual target of the direct path (after refinement).
    pub direct_tol: f64,
    /// Relative residual target of the iterative path.
    pub iterative_tol: f64,
    /// Iteration cap of the iterative path; `None` means `10 * n`.
    pub max_iter: Option<usize>,
    pub max_refinements: usize,
    /// `Auto` switches to the iterative path above this many flops per factorization.
    pub direct_flop_budget: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            direct_tol: 1e-12,
            iterative_tol: 1e-10,
            max_iter: None,
            max_refinements: 3,
            direct_flop_budget: 4e9,
        }
    }
}

impl SolverOptions {
    /// Tolerances floored at a few hundred ulps of `T`.
    fn tol<T: Real>(&self, direct: bool) -> f64 {
        let t = if direct { self.direct_tol } else { self.iterative_tol };
        t.max(256.0 * T::epsilon().to_f64_lossy())
    }

    fn use_direct<S: Scalar>(&self, a: &CsrMatrix<S>) -> bool {
        match self.method {
            SolverMethod::Direct => true,
            SolverMethod::Iterative => false,
            SolverMethod::Auto => {
                let (kl, ku) = a.pattern().bandwidth();
                let flops = a.dim() as f64 * kl as f64 * (2 * kl + ku + 1) as f64;
                flops <= self.direct_flop_budget
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodUsed {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolveReport {
    pub method: MethodUsed,
    /// Krylov iterations, or refinement sweeps for the direct path.
    pub iterations: usize,
    pub residual: f64,
    pub wall_s: f64,
}

/// LU factors of a banded matrix, LAPACK `gbtrf` style: row interchanges
/// are applied to the trailing columns only and replayed during the solve.
#[derive(Debug, Clone)]
pub struct BandedLu<S> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<S>,
    piv: Vec<usize>,
}

impl<S: Scalar> BandedLu<S> {
    pub fn factor(a: &CsrMatrix<S>) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.pattern().bandwidth();
        let width = 2 * kl + ku + 1;
        let mut band = vec![S::zero(); n * width];
        for i in 0..n {
            for (j, v) in a.row_iter(i) {
                band[i * width + j + kl - i] = v;
            }
        }
        let mut lu = Self { n, kl, ku, width, band, piv: vec![0; n] };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs_sqr();
            for r in k + 1..=last_row {
                let m = self.band[self.idx(r, k)].abs_sqr();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if best == S::Real::zero() || !best.is_finite() {
                return Err(Error::SingularMatrix { row: k });
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.idx(k, k)];
            let kk0 = self.idx(k, k);
            for r in k + 1..=last_row {
                let irk = self.idx(r, k);
                let l = self.band[irk] / pivot;
                self.band[irk] = l;
                if l == S::zero() {
                    continue;
                }
                let base_r = self.idx(r, k + 1);
                let base_k = kk0 + 1;
                for off in 0..(last_col - k) {
                    let akj = self.band[base_k + off];
                    self.band[base_r + off] -= l * akj;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [S]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != S::zero() {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.band[self.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            let base = self.idx(k, k);
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.band[base + (j - k)] * b[j];
            }
            b[k] = s / self.band[base];
        }
    }
}

fn relative_residual<S: Scalar>(a: &CsrMatrix<S>, x: &[S], b: &[S], r: &mut [S]) -> f64 {
    a.matvec_into(x, r).expect("dimensions checked");
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let nb = norm2(b).to_f64_lossy();
    norm2(r).to_f64_lossy() / nb
}

/// Solve `A x = b` to the configured relative residual.
pub fn solve<S: Scalar>(a: &CsrMatrix<S>, b: &[S], opts: &SolverOptions) -> Result<(Vec<S>, LinearSolveReport)> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let start = Instant::now();
    if norm2(b) == S::Real::zero() {
        let report = LinearSolveReport {
            method: if opts.use_direct(a) { MethodUsed::Direct } else { MethodUsed::Iterative },
            iterations: 0,
            residual: 0.0,
            wall_s: start.elapsed().as_secs_f64(),
        };
        return Ok((vec![S::zero(); n], report));
    }
    if opts.use_direct(a) {
        let lu = BandedLu::factor(a)?;
        let (x, sweeps, res) = refine(a, &lu, b, opts.tol::<S::Real>(true), opts.max_refinements)?;
        Ok((x, LinearSolveReport { method: MethodUsed::Direct, iterations: sweeps, residual: res, wall_s: start.elapsed().as_secs_f64() }))
    } else {
        let tol = opts.tol::<S::Real>(false);
        let max_iter = opts.max_iter.unwrap_or(10 * n);
        let (x, it, res) = bicgstab(a, b, None, tol, max_iter)?;
        Ok((x, LinearSolveReport { method: MethodUsed::Iterative, iterations: it, residual: res, wall_s: start.elapsed().as_secs_f64() }))
    }
}

/// Back-substitution followed by iterative refinement sweeps.
pub fn refine<S: Scalar>(
    a: &CsrMatrix<S>,
    lu: &BandedLu<S>,
    b: &[S],
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<S>, usize, f64)> {
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    let mut r = vec![S::zero(); b.len()];
    let mut res = relative_residual(a, &x, b, &mut r);
    let mut sweeps = 0;
    while res > tol && sweeps < max_sweeps && res.is_finite() {
        lu.solve_in_place(&mut r);
        for (xi, &d) in x.iter_mut().zip(&r) {
            *xi += d;
        }
        sweeps += 1;
        res = relative_residual(a, &x, b, &mut r);
    }
    if !(res <= tol) {
        return Err(Error::LinearSolveFailed { residual: res, iterations: sweeps });
    }
    Ok((x, sweeps, res))
}

/// Jacobi-preconditioned BiCGSTAB. Returns `(x, iterations, relative residual)`.
pub fn bicgstab<S: Scalar>(
    a: &CsrMatrix<S>,
    b: &[S],
    x0: Option<&[S]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<S>, usize, f64)> {
    let n = a.dim();
    let nb = norm2(b).to_f64_lossy();
    let inv_diag: Vec<S> = a
        .diagonal()
        .into_iter()
        .map(|d| if d == S::zero() { S::one() } else { S::one() / d })
        .collect();
    let precond = |v: &[S], out: &mut [S]| {
        for ((o, &vi), &di) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = vi * di;
        }
    };

    let mut x = x0.map_or_else(|| vec![S::zero(); n], <[S]>::to_vec);
    let mut r = vec![S::zero(); n];
    let mut res = relative_residual(a, &x, b, &mut r);
    if res <= tol {
        return Ok((x, 0, res));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (S::one(), S::one(), S::one());
    let mut v = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    let mut y = vec![S::zero(); n];
    let mut s = vec![S::zero(); n];
    let mut z = vec![S::zero(); n];
    let mut t = vec![S::zero(); n];

    for it in 1..=max_iter {
        let rho_new = dot(&r, &r_hat);
        if rho_new == S::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.matvec_into(&y, &mut v)?;
        alpha = rho_new / dot(&v, &r_hat);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s).to_f64_lossy() / nb <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            res = relative_residual(a, &x, b, &mut r);
            if res <= tol {
                return Ok((x, it, res));
            }
            continue;
        }
        precond(&s, &mut z);
        a.matvec_into(&z, &mut t)?;
        let tt = dot(&t, &t);
        omega = if tt == S::zero() { S::zero() } else { dot(&s, &t) / tt };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        res = norm2(&r).to_f64_lossy() / nb;
        if !res.is_finite() {
            return Err(Error::NonFinite("BiCGSTAB residual"));
        }
        if res <= tol {
            res = relative_residual(a, &x, b, &mut r);
            if res <= tol {
                return Ok((x, it, res));
            }
        }
    }
    Err(Error::LinearSolveFailed { residual: res, iterations: max_iter })
}
