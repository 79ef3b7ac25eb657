//! Structured simplicial meshes: uniform interval partitions and
//! triangulated rectangles.

use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A conforming simplicial mesh of a 1D interval or a 2D rectangle.
///
/// Nodes are stored lexicographically (x fastest). Each rectangle cell
/// `(i, j)` is split along its lower-left to upper-right diagonal into two
/// counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    dim: usize,
    coords: Vec<T>,
    cells: Vec<usize>,
    boundary: Vec<usize>,
    h: T,
    /// element counts per direction (`ny == 0` in 1D)
    nx: usize,
    ny: usize,
    lower: [T; 2],
    upper: [T; 2],
}

impl<T: Real> Mesh<T> {
    /// Uniform partition of `[a, b]` into `n_elems` elements.
    pub fn interval(a: T, b: T, n_elems: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidMesh(format!("empty interval [{a}, {b}]")));
        }
        if n_elems == 0 {
            return Err(Error::InvalidMesh("zero elements".into()));
        }
        let nf = T::from_usize_lossy(n_elems);
        let coords = (0..=n_elems)
            .map(|i| {
                if i == n_elems {
                    b
                } else {
                    a + (b - a) * T::from_usize_lossy(i) / nf
                }
            })
            .collect();
        let cells = (0..n_elems).flat_map(|e| [e, e + 1]).collect();
        Ok(Self {
            dim: 1,
            coords,
            cells,
            boundary: vec![0, n_elems],
            h: (b - a) / nf,
            nx: n_elems,
            ny: 0,
            lower: [a, T::zero()],
            upper: [b, T::zero()],
        })
    }

    /// Structured triangulation of `x_range x y_range` with `nx * ny` cells.
    pub fn rectangle(x_range: (T, T), y_range: (T, T), nx: usize, ny: usize) -> Result<Self> {
        let (x0, x1) = x_range;
        let (y0, y1) = y_range;
        if !(x0 < x1) || !(y0 < y1) {
            return Err(Error::InvalidMesh(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("zero cells in a direction".into()));
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let (nxf, nyf) = (T::from_usize_lossy(nx), T::from_usize_lossy(ny));
        let dx = (x1 - x0) / nxf;
        let dy = (y1 - y0) / nyf;

        let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
        let mut boundary = Vec::new();
        for j in 0..=ny {
            let y = if j == ny { y1 } else { y0 + (y1 - y0) * T::from_usize_lossy(j) / nyf };
            for i in 0..=nx {
                let x = if i == nx { x1 } else { x0 + (x1 - x0) * T::from_usize_lossy(i) / nxf };
                coords.push(x);
                coords.push(y);
                if i == 0 || j == 0 || i == nx || j == ny {
                    boundary.push(node(i, j));
                }
            }
        }

        let mut cells = Vec::with_capacity(6 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (ll, lr, ul, ur) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
                cells.extend_from_slice(&[ll, lr, ur]);
                cells.extend_from_slice(&[ll, ur, ul]);
            }
        }

        Ok(Self {
            dim: 2,
            coords,
            cells,
            boundary,
            h: (dx * dx + dy * dy).sqrt(),
            nx,
            ny,
            lower: [x0, y0],
            upper: [x1, y1],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    /// Nodes per element (`dim + 1`).
    pub fn nodes_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[e * k..(e + 1) * k]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    /// Maximum element diameter.
    pub fn h(&self) -> T {
        self.h
    }

    /// Element counts `(nx, ny)`; `ny == 0` for interval meshes.
    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn bounds(&self) -> ([T; 2], [T; 2]) {
        (self.lower, self.upper)
    }

    /// Signed measure of element `e` (length in 1D, area in 2D).
    pub fn cell_measure(&self, e: usize) -> T {
        let c = self.cell(e);
        match self.dim {
            1 => self.node(c[1])[0] - self.node(c[0])[0],
            _ => {
                let (p0, p1, p2) = (self.node(c[0]), self.node(c[1]), self.node(c[2]));
                let two = T::lit(2.0);
                ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])) / two
            }
        }
    }

    /// Measure of the whole domain.
    pub fn domain_measure(&self) -> T {
        match self.dim {
            1 => self.upper[0] - self.lower[0],
            _ => (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1]),
        }
    }

    /// Stable identifier of the geometry; used to validate cached state files.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Fnv1a::default();
        self.dim.hash(&mut hasher);
        self.nx.hash(&mut hasher);
        self.ny.hash(&mut hasher);
        for v in self.lower.iter().chain(self.upper.iter()) {
            v.to_f64_lossy().to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Node and element tables as CSV, for debugging.
    pub fn to_csv(&self) -> (String, String) {
        let mut nodes = String::from(if self.dim == 1 { "id,x\n" } else { "id,x,y\n" });
        for i in 0..self.n_nodes() {
            let p = self.node(i);
            let _ = write!(nodes, "{i}");
            for c in p {
                let _ = write!(nodes, ",{c}");
            }
            nodes.push('\n');
        }
        let mut elems = String::from(if self.dim == 1 { "id,n0,n1\n" } else { "id,n0,n1,n2\n" });
        for e in 0..self.n_cells() {
            let _ = write!(elems, "{e}");
            for n in self.cell(e) {
                let _ = write!(elems, ",{n}");
            }
            elems.push('\n');
        }
        (nodes, elems)
    }
}

/// `true` exactly at boundary nodes.
pub fn boundary_mask<T: Real>(mesh: &Mesh<T>) -> Vec<bool> {
    let mut mask = vec![false; mesh.n_nodes()];
    for &b in mesh.boundary_nodes() {
        mask[b] = true;
    }
    mask
}

// FNV-1a: deterministic across runs and platforms, unlike `DefaultHasher`.
struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv1a {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}
