//! P1 bilinear forms, density sampling, and the residual and Jacobian of
//! the two nonlinear (Newton-solved) schemes.
//!
//! All matrices assembled on one [`P1Space`] share its sparsity pattern, so
//! linear combinations reduce to value-wise arithmetic.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::mesh::{boundary_mask, Mesh};
use crate::quadrature::{P1Space, QuadDensity, QuadField, WeightField};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, Pattern};

/// Nodal coefficients of a complex P1 function.
pub type StateVector<T> = Vec<Complex<T>>;

/// Nonlinearity of the implicit schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearForm {
    /// `|g|^2 g` with `g` the midpoint `(u_new + u_old) / 2`.
    Midpoint,
    /// `(|u_new|^2 + |u_old|^2) / 2 * g`.
    AveragedDensity,
}

fn assemble_local<T: Real, F>(space: &P1Space<T>, mut local: F) -> CsrMatrix<T>
where
    F: FnMut(usize, &mut [T]),
{
    let k = space.dim() + 1;
    let mut vals = vec![T::zero(); space.pattern.nnz()];
    let mut buf = vec![T::zero(); k * k];
    for e in 0..space.mesh().n_cells() {
        buf.iter_mut().for_each(|v| *v = T::zero());
        local(e, &mut buf);
        for (&s, &v) in space.slots[e * k * k..(e + 1) * k * k].iter().zip(&buf) {
            vals[s] += v;
        }
    }
    CsrMatrix::new(space.pattern.clone(), vals).expect("pattern sized from the space")
}

/// `M_ij = int phi_j phi_i`, from the closed-form element matrix.
pub fn assemble_mass<T: Real>(space: &P1Space<T>) -> CsrMatrix<T> {
    let k = space.dim() + 1;
    let denom = T::from_usize_lossy(k * (k + 1));
    assemble_local(space, |e, buf| {
        let c = space.measure(e) / denom;
        for a in 0..k {
            for b in 0..k {
                buf[a * k + b] = if a == b { c + c } else { c };
            }
        }
    })
}

/// `A_ij = int grad phi_j . grad phi_i`
pub fn assemble_stiffness<T: Real>(space: &P1Space<T>) -> CsrMatrix<T> {
    let k = space.dim() + 1;
    assemble_local(space, |e, buf| {
        let m = space.measure(e);
        for a in 0..k {
            for b in 0..k {
                let ga = space.grad(e, a);
                let gb = space.grad(e, b);
                buf[a * k + b] = m * ga.iter().zip(gb).map(|(&x, &y)| x * y).sum::<T>();
            }
        }
    })
}

/// `W_ij = sum_K sum_q w_q omega_q phi_j(x_q) phi_i(x_q)`
pub fn assemble_weighted_mass<T: Real>(space: &P1Space<T>, w: &WeightField<T>) -> Result<CsrMatrix<T>> {
    w.check_layout(space)?;
    let mut vals = vec![T::zero(); space.pattern.nnz()];
    add_weighted_mass(space, w, T::one(), &mut vals);
    CsrMatrix::new(space.pattern.clone(), vals)
}

/// `vals += scale * W(w)` on the space's pattern; `w` must match the layout.
pub(crate) fn add_weighted_mass<T: Real>(space: &P1Space<T>, w: &WeightField<T>, scale: T, vals: &mut [T]) {
    let k = space.dim() + 1;
    let nq = space.rule.n_points();
    for e in 0..space.mesh().n_cells() {
        let slots = &space.slots[e * k * k..(e + 1) * k * k];
        for q in 0..nq {
            let c = scale * space.qweight(e, q) * w.values[e * nq + q];
            if c == T::zero() {
                continue;
            }
            let lam = space.rule.shape(q);
            for a in 0..k {
                let ca = c * lam[a];
                for b in 0..k {
                    vals[slots[a * k + b]] += ca * lam[b];
                }
            }
        }
    }
}

/// Values of a P1 function at every quadrature point.
pub fn evaluate_at_quadrature<T: Real>(space: &P1Space<T>, u: &[Complex<T>]) -> Vec<Complex<T>> {
    let nq = space.rule.n_points();
    let mut out = Vec::with_capacity(space.n_quad_total());
    for e in 0..space.mesh().n_cells() {
        let cell = space.mesh().cell(e);
        for q in 0..nq {
            let lam = space.rule.shape(q);
            let mut v = Complex::new(T::zero(), T::zero());
            for (a, &n) in cell.iter().enumerate() {
                v += u[n] * lam[a];
            }
            out.push(v);
        }
    }
    out
}

/// `|u_h|^2` at quadrature points.
pub fn sample_density<T: Real>(space: &P1Space<T>, u: &[Complex<T>]) -> Result<QuadDensity<T>> {
    check_len(space, u)?;
    let values = evaluate_at_quadrature(space, u).into_iter().map(|v| v.norm_sqr()).collect();
    Ok(QuadField { values, n_points: space.rule.n_points() })
}

/// Hermitian matrix of `L = -i (x d/dy - y d/dx)`.
///
/// The real derivative form `D_ij = int (x d_y phi_j - y d_x phi_j) phi_i` is
/// antisymmetrized before multiplying by `-i`, so `<L u, u>` is real for
/// every `u`.
pub fn assemble_angular_momentum<T: Real>(space: &P1Space<T>) -> Result<CsrMatrix<Complex<T>>> {
    if space.dim() != 2 {
        return Err(Error::InvalidArgument("angular momentum needs a 2D mesh".into()));
    }
    let k = 3;
    let nq = space.rule.n_points();
    let d = assemble_local(space, |e, buf| {
        for q in 0..nq {
            let x = space.qpoint(e, q);
            let w = space.qweight(e, q);
            let lam = space.rule.shape(q);
            for b in 0..k {
                let g = space.grad(e, b);
                let rot = x[0] * g[1] - x[1] * g[0];
                for a in 0..k {
                    buf[a * k + b] += w * lam[a] * rot;
                }
            }
        }
    });
    let dt = d.adjoint();
    let half = T::lit(0.5);
    let vals = d.values().iter().zip(dt.values()).map(|(&a, &b)| Complex::new(T::zero(), -half * (a - b))).collect();
    CsrMatrix::new(space.pattern.clone(), vals)
}

/// Nodal interpolant of `f`; boundary coefficients are zeroed on request.
pub fn interpolate_nodal<T: Real, F>(mesh: &Mesh<T>, f: F, zero_boundary: bool) -> StateVector<T>
where
    F: Fn(&[T]) -> Complex<T>,
{
    let mut u: Vec<_> = (0..mesh.n_nodes()).map(|i| f(mesh.node(i))).collect();
    if zero_boundary {
        for &i in mesh.boundary_nodes() {
            u[i] = Complex::new(T::zero(), T::zero());
        }
    }
    u
}

fn check_len<T: Real>(space: &P1Space<T>, u: &[Complex<T>]) -> Result<()> {
    if u.len() != space.n_dofs() {
        return Err(Error::DimensionMismatch { expected: space.n_dofs(), got: u.len() });
    }
    Ok(())
}

/// The assembled operators of one problem on one mesh:
/// `M`, `A`, `M_V` and `H0 = kinetic * A + M_V`.
#[derive(Debug, Clone)]
pub struct Operators<T> {
    space: P1Space<T>,
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub potential: WeightField<T>,
    pub potential_mass: CsrMatrix<T>,
    pub kinetic: T,
    pub hamiltonian: CsrMatrix<T>,
    mask: Vec<bool>,
    block: Arc<Pattern>,
    /// For every CSR position, the first value index of its 2x2 block in
    /// the upper and in the lower real row.
    block_pos: Vec<(usize, usize)>,
}

impl<T: Real> Operators<T> {
    pub fn new(space: P1Space<T>, potential: WeightField<T>, kinetic: T) -> Result<Self> {
        potential.check_layout(&space)?;
        if potential.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space);
        let potential_mass = assemble_weighted_mass(&space, &potential)?;
        let hamiltonian = stiffness.add_scaled(&potential_mass, kinetic, T::one())?;
        let mask = boundary_mask(space.mesh());
        let pattern = space.pattern.clone();
        let block = Arc::new(pattern.block2());
        let mut block_pos = Vec::with_capacity(pattern.nnz());
        for i in 0..pattern.n {
            for t in 0..pattern.row(i).len() {
                block_pos.push((block.row_ptr[2 * i] + 2 * t, block.row_ptr[2 * i + 1] + 2 * t));
            }
        }
        Ok(Self { space, mass, stiffness, potential, potential_mass, kinetic, hamiltonian, mask, block, block_pos })
    }

    /// Operators with `V = 0`.
    pub fn free(space: P1Space<T>, kinetic: T) -> Result<Self> {
        let v = QuadField::constant(&space, T::zero());
        Self::new(space, v, kinetic)
    }

    pub fn space(&self) -> &P1Space<T> {
        &self.space
    }

    pub fn mesh(&self) -> &Mesh<T> {
        self.space.mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.mask
    }

    pub(crate) fn check_state(&self, u: &[Complex<T>]) -> Result<()> {
        check_len(&self.space, u)
    }

    /// `H0 + beta W(rho)` as a real matrix on the shared pattern.
    pub fn density_hamiltonian(&self, rho: Option<&QuadDensity<T>>, beta: T) -> Result<CsrMatrix<T>> {
        let mut h = self.hamiltonian.clone();
        if let Some(rho) = rho {
            rho.check_layout(&self.space)?;
            if beta != T::zero() {
                add_weighted_mass(&self.space, rho, beta, h.values_mut());
            }
        }
        Ok(h)
    }

    /// `i a M + g H` for a real `H` on the shared pattern.
    pub fn shifted(&self, h: &CsrMatrix<T>, a: T, g: T) -> CsrMatrix<Complex<T>> {
        let vals = self.mass.values().iter().zip(h.values()).map(|(&m, &hv)| Complex::new(g * hv, a * m)).collect();
        CsrMatrix::new(self.mass.pattern().clone(), vals).expect("shared pattern")
    }

    /// Zero the boundary entries of a vector.
    pub fn zero_boundary(&self, v: &mut [Complex<T>]) {
        for (vi, &b) in v.iter_mut().zip(&self.mask) {
            if b {
                *vi = Complex::new(T::zero(), T::zero());
            }
        }
    }

    /// `F(w) = i M (w - u)/tau - H0 g - beta N(u, w)` with boundary rows `w_i`.
    pub fn nonlinear_residual(
        &self,
        form: NonlinearForm,
        u_old: &[Complex<T>],
        u_new: &[Complex<T>],
        beta: T,
        tau: T,
    ) -> Result<StateVector<T>> {
        self.check_state(u_old)?;
        self.check_state(u_new)?;
        let half = T::lit(0.5);
        let diff: Vec<_> = u_new.iter().zip(u_old).map(|(w, u)| w - u).collect();
        let mid: Vec<_> = u_new.iter().zip(u_old).map(|(w, u)| (w + u) * half).collect();
        let md = self.mass.matvec_complex(&diff)?;
        let hg = self.hamiltonian.matvec_complex(&mid)?;
        let inv_tau = T::one() / tau;
        let mut f: Vec<_> = md.iter().zip(&hg).map(|(m, h)| Complex::new(-m.im, m.re) * inv_tau - h).collect();
        if beta != T::zero() {
            let n = self.nonlinear_load(form, u_old, u_new);
            for (fi, ni) in f.iter_mut().zip(n) {
                *fi -= ni * beta;
            }
        }
        for (i, &b) in self.mask.iter().enumerate() {
            if b {
                f[i] = u_new[i];
            }
        }
        Ok(f)
    }

    /// `N_i = int f(u_old, u_new) phi_i` for the scheme's nonlinearity `f`.
    fn nonlinear_load(&self, form: NonlinearForm, u_old: &[Complex<T>], u_new: &[Complex<T>]) -> StateVector<T> {
        let sp = &self.space;
        let half = T::lit(0.5);
        let nq = sp.rule.n_points();
        let mut n = vec![Complex::new(T::zero(), T::zero()); sp.n_dofs()];
        for e in 0..sp.mesh().n_cells() {
            let cell = sp.mesh().cell(e);
            for q in 0..nq {
                let lam = sp.rule.shape(q);
                let (mut wq, mut uq) = (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()));
                for (a, &i) in cell.iter().enumerate() {
                    wq += u_new[i] * lam[a];
                    uq += u_old[i] * lam[a];
                }
                let g = (wq + uq) * half;
                let f = match form {
                    NonlinearForm::Midpoint => g * g.norm_sqr(),
                    NonlinearForm::AveragedDensity => g * ((wq.norm_sqr() + uq.norm_sqr()) * half),
                };
                let fw = f * sp.qweight(e, q);
                for (a, &i) in cell.iter().enumerate() {
                    n[i] += fw * lam[a];
                }
            }
        }
        n
    }

    /// Real `2m x 2m` Jacobian of [`Self::nonlinear_residual`] with respect
    /// to `(Re w_0, Im w_0, Re w_1, ...)`.
    pub fn newton_jacobian(
        &self,
        form: NonlinearForm,
        u_old: &[Complex<T>],
        u_new: &[Complex<T>],
        beta: T,
        tau: T,
    ) -> Result<CsrMatrix<T>> {
        self.check_state(u_old)?;
        self.check_state(u_new)?;
        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let inv_tau = T::one() / tau;
        let mut vals = vec![T::zero(); self.block.nnz()];
        for (pos, &(r0, r1)) in self.block_pos.iter().enumerate() {
            let re = -half * self.hamiltonian.values()[pos];
            let im = self.mass.values()[pos] * inv_tau;
            vals[r0] = re;
            vals[r0 + 1] = -im;
            vals[r1] = im;
            vals[r1 + 1] = re;
        }
        if beta != T::zero() {
            let sp = &self.space;
            let k = sp.dim() + 1;
            let nq = sp.rule.n_points();
            for e in 0..sp.mesh().n_cells() {
                let cell = sp.mesh().cell(e);
                let slots = &sp.slots[e * k * k..(e + 1) * k * k];
                for q in 0..nq {
                    let lam = sp.rule.shape(q);
                    let (mut wq, mut uq) = (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()));
                    for (a, &i) in cell.iter().enumerate() {
                        wq += u_new[i] * lam[a];
                        uq += u_old[i] * lam[a];
                    }
                    let g = (wq + uq) * half;
                    let (p, r) = (g.re, g.im);
                    // d f / d(Re w, Im w), row-major
                    let d = match form {
                        NonlinearForm::Midpoint => {
                            let two = T::lit(2.0);
                            let three = T::lit(3.0);
                            [
                                half * (three * p * p + r * r),
                                half * two * p * r,
                                half * two * p * r,
                                half * (p * p + three * r * r),
                            ]
                        }
                        NonlinearForm::AveragedDensity => {
                            let s = quarter * (wq.norm_sqr() + uq.norm_sqr());
                            [s + p * wq.re, p * wq.im, r * wq.re, s + r * wq.im]
                        }
                    };
                    let c = -beta * sp.qweight(e, q);
                    for a in 0..k {
                        for b in 0..k {
                            let (r0, r1) = self.block_pos[slots[a * k + b]];
                            let f = c * lam[a] * lam[b];
                            vals[r0] += f * d[0];
                            vals[r0 + 1] += f * d[1];
                            vals[r1] += f * d[2];
                            vals[r1 + 1] += f * d[3];
                        }
                    }
                }
            }
        }
        let mut j = CsrMatrix::new(self.block.clone(), vals)?;
        let mask2: Vec<bool> = self.mask.iter().flat_map(|&b| [b, b]).collect();
        j.apply_dirichlet(&mask2);
        Ok(j)
    }

    /// `int |u_h|^4`, exact.
    pub fn quartic_integral(&self, u: &[Complex<T>]) -> Result<T> {
        let rho = sample_density(&self.space, u)?;
        Ok(self.density_product(&rho, &rho))
    }

    /// `int rho_1 rho_2` over quadrature fields.
    pub fn density_product(&self, a: &QuadDensity<T>, b: &QuadDensity<T>) -> T {
        let sp = &self.space;
        let nq = sp.rule.n_points();
        let mut s = T::zero();
        for e in 0..sp.mesh().n_cells() {
            for q in 0..nq {
                let i = e * nq + q;
                s += sp.qweight(e, q) * a.values[i] * b.values[i];
            }
        }
        s
    }
}

/// Residual of the nonlinear scheme; see [`Operators::nonlinear_residual`].
pub fn assemble_nonlinear_residual<T: Real>(
    ops: &Operators<T>,
    form: NonlinearForm,
    u_old: &[Complex<T>],
    u_new: &[Complex<T>],
    beta: T,
    tau: T,
) -> Result<StateVector<T>> {
    ops.nonlinear_residual(form, u_old, u_new, beta, tau)
}

/// Real block Jacobian; see [`Operators::newton_jacobian`].
pub fn assemble_newton_jacobian<T: Real>(
    ops: &Operators<T>,
    form: NonlinearForm,
    u_old: &[Complex<T>],
    u_new: &[Complex<T>],
    beta: T,
    tau: T,
) -> Result<CsrMatrix<T>> {
    ops.newton_jacobian(form, u_old, u_new, beta, tau)
}

/// Interleave a complex vector into `(re_0, im_0, re_1, ...)`.
pub fn to_real_form<T: Real>(u: &[Complex<T>]) -> Vec<T> {
    u.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn from_real_form<T: Real>(x: &[T]) -> StateVector<T> {
    x.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect()
}
