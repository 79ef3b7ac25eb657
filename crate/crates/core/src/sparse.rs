//! Compressed sparse row matrices over real or complex scalars.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Row offsets and sorted column indices of a square CSR matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl Pattern {
    /// Pattern coupling every pair of nodes that share a cell.
    pub fn from_cells<'a, I>(n: usize, cells: I) -> Self
    where
        I: Iterator<Item = &'a [usize]>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for cell in cells {
            for &i in cell {
                rows[i].extend_from_slice(cell);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect() }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Value index of entry `(i, j)`, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|k| start + k)
    }

    /// `(lower, upper)` bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut up = 0;
        for i in 0..self.n {
            for &j in self.row(i) {
                if j < i {
                    lo = lo.max(i - j);
                } else {
                    up = up.max(j - i);
                }
            }
        }
        (lo, up)
    }

    /// Expand every entry into a 2x2 block (real form of a complex matrix),
    /// with unknowns interleaved as `(re_0, im_0, re_1, im_1, ...)`.
    pub fn block2(&self) -> Self {
        let n = 2 * self.n;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(4 * self.nnz());
        row_ptr.push(0);
        for i in 0..self.n {
            for _ in 0..2 {
                for &j in self.row(i) {
                    col_idx.push(2 * j);
                    col_idx.push(2 * j + 1);
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self { n, row_ptr, col_idx }
    }
}

/// Square sparse matrix in CSR layout. The pattern is shared between
/// matrices assembled on the same mesh.
#[derive(Debug, Clone)]
pub struct CsrMatrix<S> {
    pattern: Arc<Pattern>,
    vals: Vec<S>,
}

impl<S: Scalar> PartialEq for CsrMatrix<S>
where
    S: PartialEq,
{
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern && self.vals == other.vals
    }
}

impl<S: Scalar> CsrMatrix<S> {
    pub fn new(pattern: Arc<Pattern>, vals: Vec<S>) -> Result<Self> {
        if vals.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch { expected: pattern.nnz(), got: vals.len() });
        }
        Ok(Self { pattern, vals })
    }

    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let nnz = pattern.nnz();
        Self { pattern, vals: vec![S::zero(); nnz] }
    }

    pub fn identity(n: usize) -> Self {
        Self { pattern: Arc::new(Pattern::identity(n)), vals: vec![S::one(); n] }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, S)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch { expected: n, got: i.max(j) + 1 });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { pattern: Arc::new(Pattern { n, row_ptr, col_idx }), vals })
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[S] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.vals
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.pattern.position(i, j).map_or(S::zero(), |k| self.vals[k])
    }

    /// Iterate over the stored entries of row `i`.
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let r = self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1];
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[S]) -> Result<Vec<S>> {
        let mut y = vec![S::zero(); self.dim()];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[S], y: &mut [S]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let p = &*self.pattern;
        for i in 0..n {
            let mut s = S::zero();
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                s += self.vals[k] * x[p.col_idx[k]];
            }
            y[i] = s;
        }
        Ok(())
    }

    /// `alpha A + beta B`. Patterns may differ; the result stores their union.
    pub fn add_scaled(&self, other: &Self, alpha: S, beta: S) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        if self.same_pattern(other) {
            let vals = self.vals.iter().zip(&other.vals).map(|(&a, &b)| alpha * a + beta * b).collect();
            return Ok(Self { pattern: self.pattern.clone(), vals });
        }
        let n = self.dim();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            let mut a = self.row_iter(i).peekable();
            let mut b = other.row_iter(i).peekable();
            loop {
                let (j, v) = match (a.peek(), b.peek()) {
                    (Some(&(ja, va)), Some(&(jb, vb))) => {
                        if ja == jb {
                            a.next();
                            b.next();
                            (ja, alpha * va + beta * vb)
                        } else if ja < jb {
                            a.next();
                            (ja, alpha * va)
                        } else {
                            b.next();
                            (jb, beta * vb)
                        }
                    }
                    (Some(&(ja, va)), None) => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (None, Some(&(jb, vb))) => {
                        b.next();
                        (jb, beta * vb)
                    }
                    (None, None) => break,
                };
                col_idx.push(j);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { pattern: Arc::new(Pattern { n, row_ptr, col_idx }), vals })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim();
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..n {
            for (j, v) in self.row_iter(i) {
                trip.push((j, i, v.conj()));
            }
        }
        let t = Self::from_triplets(n, &trip).expect("indices in range");
        // keep the shared pattern when the structure is symmetric
        if *t.pattern == *self.pattern {
            Self { pattern: self.pattern.clone(), vals: t.vals }
        } else {
            t
        }
    }

    /// Replace rows and columns of masked indices by the identity.
    pub fn apply_dirichlet(&mut self, mask: &[bool]) {
        let p = self.pattern.clone();
        for i in 0..p.n {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let j = p.col_idx[k];
                if mask[i] || mask[j] {
                    self.vals[k] = if i == j { S::one() } else { S::zero() };
                }
            }
        }
    }

    pub fn map<R: Scalar, F: Fn(S) -> R>(&self, f: F) -> CsrMatrix<R> {
        CsrMatrix { pattern: self.pattern.clone(), vals: self.vals.iter().map(|&v| f(v)).collect() }
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let n = self.dim();
        let mut d = vec![vec![S::zero(); n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row_iter(i) {
                row[j] = v;
            }
        }
        d
    }
}

impl<T: Real> CsrMatrix<T> {
    pub fn to_complex(&self) -> CsrMatrix<Complex<T>> {
        self.map(|v| Complex::new(v, T::zero()))
    }

    /// `y = A x` for a real matrix and a complex vector.
    pub fn matvec_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let p = &*self.pattern;
        Ok((0..n)
            .map(|i| {
                let mut s = Complex::new(T::zero(), T::zero());
                for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                    s += x[p.col_idx[k]] * self.vals[k];
                }
                s
            })
            .collect())
    }

    /// `Re <A x, x>` for a real symmetric matrix.
    pub fn quadratic_form(&self, x: &[Complex<T>]) -> Result<T> {
        let ax = self.matvec_complex(x)?;
        Ok(ax.iter().zip(x).map(|(a, b)| (a * b.conj()).re).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec() {
        let id = CsrMatrix::<f64>::identity(4);
        let x = vec![1.0, -2.0, 3.5, 0.25];
        assert_eq!(id.matvec(&x).unwrap(), x);
        assert!(id.matvec(&x[..3]).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 4.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.pattern().row(0), &[0, 1]);
    }

    #[test]
    fn add_scaled_self_cancels() {
        let a = CsrMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 2, -1.0), (2, 1, 5.0)]).unwrap();
        let z = a.add_scaled(&a, 1.0, -1.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn add_scaled_union_pattern() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, &[(0, 1, 2.0), (1, 1, 3.0)]).unwrap();
        let c = a.add_scaled(&b, 2.0, 1.0).unwrap();
        assert_eq!(c.to_dense(), vec![vec![2.0, 2.0], vec![0.0, 5.0]]);
    }

    #[test]
    fn dirichlet_rows_and_columns() {
        let mut a = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0)],
        )
        .unwrap();
        a.apply_dirichlet(&[true, false, false]);
        assert_eq!(a.to_dense(), vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]]);
    }

    #[test]
    fn block2_layout() {
        let p = Pattern::from_cells(3, [[0usize, 1], [1, 2]].iter().map(|c| &c[..]));
        let b = p.block2();
        assert_eq!(b.n, 6);
        assert_eq!(b.row(0), &[0, 1, 2, 3]);
        assert_eq!(b.row(3), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(b.bandwidth(), (3, 3));
    }

    #[test]
    fn adjoint_conjugates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 1, Complex::new(1.0, 2.0)), (1, 0, Complex::new(0.0, 0.0))]).unwrap();
        let ah = a.adjoint();
        assert_eq!(ah.get(1, 0), Complex::new(1.0, -2.0));
    }
}
