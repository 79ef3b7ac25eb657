//! Quadrature rules and the per-element quadrature layout of the P1 space.
//!
//! The rules are exact for every integrand the time integrators produce:
//! products of up to four P1 factors (degree 4). In 1D the 3-point Gauss rule
//! is exact to degree 5; on triangles the 6-point rule is exact to degree 4.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Quadrature rule on the reference simplex, in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct QuadRule<T> {
    /// `n_points * (dim + 1)` barycentric coordinates.
    pub bary: Vec<T>,
    /// Weights; they sum to the reference measure (1 in 1D, 1/2 in 2D).
    pub weights: Vec<T>,
    pub dim: usize,
}

impl<T: Real> QuadRule<T> {
    /// 3-point Gauss–Legendre rule on `[0, 1]`.
    pub fn gauss3() -> Self {
        let d = T::lit(0.6).sqrt() / T::lit(2.0);
        let half = T::lit(0.5);
        let s = [half - d, half, half + d];
        let bary = s.iter().flat_map(|&s| [T::one() - s, s]).collect();
        let weights = vec![T::lit(5.0 / 18.0), T::lit(8.0 / 18.0), T::lit(5.0 / 18.0)];
        Self { bary, weights, dim: 1 }
    }

    /// Symmetric 6-point rule on the reference triangle, exact to degree 4.
    pub fn triangle6() -> Self {
        let a = T::lit(0.445_948_490_915_964_886_32);
        let b = T::lit(0.091_576_213_509_770_743_46);
        let wa = T::lit(0.223_381_589_678_011_465_7) / T::lit(2.0);
        let wb = T::lit(0.109_951_743_655_321_867_6) / T::lit(2.0);
        let two = T::lit(2.0);
        let one = T::one();
        let mut bary = Vec::with_capacity(18);
        let mut weights = Vec::with_capacity(6);
        for (p, w) in [(a, wa), (b, wb)] {
            let c = one - two * p;
            for xi in [[c, p, p], [p, c, p], [p, p, c]] {
                bary.extend_from_slice(&xi);
                weights.push(w);
            }
        }
        Self { bary, weights, dim: 2 }
    }

    pub fn for_dim(dim: usize) -> Self {
        if dim == 1 {
            Self::gauss3()
        } else {
            Self::triangle6()
        }
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Barycentric coordinates of point `q` (= P1 shape function values).
    pub fn shape(&self, q: usize) -> &[T] {
        let k = self.dim + 1;
        &self.bary[q * k..(q + 1) * k]
    }

    pub fn reference_measure(&self) -> T {
        if self.dim == 1 {
            T::one()
        } else {
            T::lit(0.5)
        }
    }
}

/// Real samples at every `(element, quadrature point)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField<T> {
    pub values: Vec<T>,
    pub n_points: usize,
}

/// Densities sampled at quadrature points.
pub type QuadDensity<T> = QuadField<T>;
/// Potential or density weights at quadrature points.
pub type WeightField<T> = QuadField<T>;

impl<T: Real> QuadField<T> {
    pub fn constant(space: &P1Space<T>, c: T) -> Self {
        Self { values: vec![c; space.n_quad_total()], n_points: space.rule.n_points() }
    }

    /// Element-wise values of element `e`.
    pub fn cell(&self, e: usize) -> &[T] {
        &self.values[e * self.n_points..(e + 1) * self.n_points]
    }

    pub fn check_layout(&self, space: &P1Space<T>) -> Result<()> {
        if self.values.len() != space.n_quad_total() || self.n_points != space.rule.n_points() {
            return Err(Error::DimensionMismatch { expected: space.n_quad_total(), got: self.values.len() });
        }
        Ok(())
    }
}

/// The P1 Lagrange space on a mesh, with precomputed element geometry and
/// the CSR slot of every local matrix entry.
#[derive(Debug, Clone)]
pub struct P1Space<T> {
    mesh: Mesh<T>,
    pub rule: QuadRule<T>,
    /// `|K|` per element
    measure: Vec<T>,
    /// Shape function gradients per element: `(dim + 1) * dim` values.
    grads: Vec<T>,
    /// Physical coordinates of quadrature points: `n_cells * nq * dim`.
    qpoints: Vec<T>,
    pub(crate) pattern: std::sync::Arc<crate::sparse::Pattern>,
    /// `n_cells * (dim+1)^2` CSR value positions for local entries `(a, b)`.
    pub(crate) slots: Vec<usize>,
}

impl<T: Real> P1Space<T> {
    pub fn new(mesh: Mesh<T>) -> Self {
        let dim = mesh.dim();
        let k = dim + 1;
        let rule = QuadRule::for_dim(dim);
        let nq = rule.n_points();
        let nc = mesh.n_cells();
        let mut measure = Vec::with_capacity(nc);
        let mut grads = Vec::with_capacity(nc * k * dim);
        let mut qpoints = Vec::with_capacity(nc * nq * dim);
        for e in 0..nc {
            let cell = mesh.cell(e);
            let meas = mesh.cell_measure(e);
            measure.push(meas);
            if dim == 1 {
                let inv = T::one() / meas;
                grads.extend_from_slice(&[-inv, inv]);
            } else {
                let (p0, p1, p2) = (mesh.node(cell[0]), mesh.node(cell[1]), mesh.node(cell[2]));
                let det = T::lit(2.0) * meas;
                // grad(lambda_i) = rot90(opposite edge) / det
                let g = |pa: &[T], pb: &[T]| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
                let g0 = g(p1, p2);
                let g1 = g(p2, p0);
                let g2 = g(p0, p1);
                grads.extend_from_slice(&[g0[0], g0[1], g1[0], g1[1], g2[0], g2[1]]);
            }
            for q in 0..nq {
                let lam = rule.shape(q);
                for c in 0..dim {
                    let mut x = T::zero();
                    for a in 0..k {
                        x += lam[a] * mesh.node(cell[a])[c];
                    }
                    qpoints.push(x);
                }
            }
        }
        let pattern = crate::sparse::Pattern::from_cells(mesh.n_nodes(), (0..nc).map(|e| mesh.cell(e)));
        let mut slots = Vec::with_capacity(nc * k * k);
        for e in 0..nc {
            let cell = mesh.cell(e);
            for &i in cell {
                for &j in cell {
                    slots.push(pattern.position(i, j).expect("pattern covers element couplings"));
                }
            }
        }
        Self { mesh, rule, measure, grads, qpoints, pattern: std::sync::Arc::new(pattern), slots }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn pattern(&self) -> &std::sync::Arc<crate::sparse::Pattern> {
        &self.pattern
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn n_quad_total(&self) -> usize {
        self.mesh.n_cells() * self.rule.n_points()
    }

    pub fn measure(&self, e: usize) -> T {
        self.measure[e]
    }

    /// Gradient of local shape function `a` on element `e`.
    pub fn grad(&self, e: usize, a: usize) -> &[T] {
        let d = self.dim();
        let k = d + 1;
        &self.grads[(e * k + a) * d..(e * k + a + 1) * d]
    }

    /// Physical coordinates of quadrature point `q` on element `e`.
    pub fn qpoint(&self, e: usize, q: usize) -> &[T] {
        let d = self.dim();
        let nq = self.rule.n_points();
        &self.qpoints[(e * nq + q) * d..(e * nq + q + 1) * d]
    }

    /// Physical quadrature weight `w_q |K| / |K_ref|`.
    #[inline]
    pub fn qweight(&self, e: usize, q: usize) -> T {
        self.rule.weights[q] * self.measure[e] / self.rule.reference_measure()
    }

    /// Sample a pointwise function at all quadrature points.
    pub fn sample<F: Fn(&[T]) -> T>(&self, f: F) -> QuadField<T> {
        let nq = self.rule.n_points();
        let values = (0..self.mesh.n_cells())
            .flat_map(|e| (0..nq).map(move |q| (e, q)))
            .map(|(e, q)| f(self.qpoint(e, q)))
            .collect();
        QuadField { values, n_points: nq }
    }

    /// Integral of a quadrature field.
    pub fn integrate(&self, w: &QuadField<T>) -> T {
        let nq = self.rule.n_points();
        let mut s = T::zero();
        for e in 0..self.mesh.n_cells() {
            for q in 0..nq {
                s += self.qweight(e, q) * w.values[e * nq + q];
            }
        }
        s
    }
}
