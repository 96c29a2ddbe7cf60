//! Compressed-row complex sparse matrices.
//!
//! [`SparseOperator`] is the square operator type used throughout the crate.
//! Entries are kept in row-major canonical order with no duplicates and no
//! explicit zeros, so two operators built along different routes compare
//! equal entry by entry.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Rectangular CSR matrix. Rows are sorted by column with unique columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    /// Assemble from unordered triplets. Duplicates are summed; entries that
    /// sum to exactly zero are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trips {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange { row: r, col: c, nrows, ncols });
            }
        }
        trips.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != C64::new(0.0, 0.0));

        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Canonical (row, col, value) iteration.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        let trips = self.triplets().map(|(r, c, v)| (c, r, v.conj()));
        Self::from_triplets(self.ncols, self.nrows, trips).expect("transpose stays in range")
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.nrows, self.ncols, self.triplets().map(|(r, c, v)| (r, c, v * s)))
            .expect("same shape")
    }

    /// `y = self · x`
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            let mut acc = C64::new(0.0, 0.0);
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            *yr = acc;
        }
    }

    /// `out += alpha · self · m` where `m` is a row-major `ncols × width`
    /// dense block and `out` is row-major `nrows × width`.
    pub fn mul_dense_rowmajor_acc(&self, alpha: C64, m: &[C64], width: usize, out: &mut [C64]) {
        debug_assert_eq!(m.len(), self.ncols * width);
        debug_assert_eq!(out.len(), self.nrows * width);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let dst = &mut out[r * width..(r + 1) * width];
            for (&c, &v) in cols.iter().zip(vals) {
                let f = alpha * v;
                let src = &m[c * width..(c + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += f * s;
                }
            }
        }
    }

    /// Sparse product `self · rhs`.
    pub fn matmul(&self, rhs: &Csr) -> Result<Csr> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch { expected: self.ncols, found: rhs.nrows });
        }
        let mut trips = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rc, rv) = rhs.row(k);
                for (&c, &b) in rc.iter().zip(rv) {
                    trips.push((r, c, a * b));
                }
            }
        }
        Csr::from_triplets(self.nrows, rhs.ncols, trips)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Sub-matrix selecting `rows` and `cols` (given as index lists).
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            col_map[c] = j;
        }
        let mut trips = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    trips.push((i, col_map[c], v));
                }
            }
        }
        Csr::from_triplets(rows.len(), cols.len(), trips).expect("restricted indices in range")
    }

    fn zip_with(&self, other: &Csr, f: impl Fn(C64) -> C64) -> Result<Csr> {
        if (self.nrows, self.ncols) != (other.nrows, other.ncols) {
            return Err(Error::DimensionMismatch { expected: self.nrows, found: other.nrows });
        }
        let trips = self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, f(v))));
        Csr::from_triplets(self.nrows, self.ncols, trips)
    }
}

/// Square complex operator on a composite space of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    inner: Csr,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        Ok(Self { inner: Csr::from_triplets(dim, dim, triplets)? })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { inner: Csr::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal((0..dim).map(|_| C64::new(1.0, 0.0)))
    }

    pub fn diagonal(diag: impl IntoIterator<Item = C64>) -> Self {
        let d: Vec<C64> = diag.into_iter().collect();
        let dim = d.len();
        Self::from_triplets(dim, d.into_iter().enumerate().map(|(i, v)| (i, i, v))).expect("diagonal in range")
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn csr(&self) -> &Csr {
        &self.inner
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.inner.triplets()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.inner.get(r, c)
    }

    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    pub fn scale(&self, s: impl Into<C64>) -> Self {
        Self { inner: self.inner.scale(s.into()) }
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.inner.mul_vec(x, &mut y);
        Ok(y)
    }

    pub fn try_mul(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        Ok(Self { inner: self.inner.matmul(&rhs.inner)? })
    }

    pub fn try_add(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        Ok(Self { inner: self.inner.zip_with(&rhs.inner, |v| v)? })
    }

    pub fn try_sub(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        Ok(Self { inner: self.inner.zip_with(&rhs.inner, |v| -v)? })
    }

    /// `[self, rhs]`
    pub fn commutator(&self, rhs: &SparseOperator) -> Result<SparseOperator> {
        self.try_mul(rhs)?.try_sub(&rhs.try_mul(self)?)
    }

    /// Largest entry modulus (0 for the zero operator).
    pub fn max_abs(&self) -> f64 {
        self.inner.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.try_sub(&self.adjoint()).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    /// Diagonal entries as a dense vector.
    pub fn diagonal_values(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.inner.to_dense()
    }

    /// Conjugation `P A P^T` by the basis permutation `perm` (old index →
    /// new index).
    pub fn permuted(&self, perm: &[usize]) -> Result<SparseOperator> {
        if perm.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: perm.len() });
        }
        Self::from_triplets(self.dim(), self.triplets().map(|(r, c, v)| (perm[r], perm[c], v)))
    }
}

impl Add for &SparseOperator {
    type Output = SparseOperator;
    fn add(self, rhs: Self) -> SparseOperator {
        self.try_add(rhs).expect("operator dimensions must agree")
    }
}

impl Sub for &SparseOperator {
    type Output = SparseOperator;
    fn sub(self, rhs: Self) -> SparseOperator {
        self.try_sub(rhs).expect("operator dimensions must agree")
    }
}

impl Mul for &SparseOperator {
    type Output = SparseOperator;
    fn mul(self, rhs: Self) -> SparseOperator {
        self.try_mul(rhs).expect("operator dimensions must agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_are_canonical() {
        let a = SparseOperator::from_triplets(3, [(2, 0, c(1.0)), (0, 1, c(2.0)), (0, 1, c(1.0)), (1, 1, c(0.0))]).unwrap();
        let t: Vec<_> = a.triplets().collect();
        assert_eq!(t, vec![(0, 1, c(3.0)), (2, 0, c(1.0))]);
    }

    #[test]
    fn duplicates_cancel_to_nothing() {
        let a = SparseOperator::from_triplets(2, [(0, 0, c(1.0)), (0, 0, c(-1.0))]).unwrap();
        assert_eq!(a.nnz(), 0);
        assert_eq!(a, SparseOperator::zeros(2));
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(SparseOperator::from_triplets(2, [(2, 0, c(1.0))]).is_err());
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseOperator::from_triplets(3, [(0, 1, C64::new(1.0, 2.0)), (2, 2, c(3.0)), (1, 0, c(-1.0))]).unwrap();
        let b = SparseOperator::from_triplets(3, [(1, 2, c(2.0)), (2, 0, C64::new(0.0, 1.0)), (0, 0, c(1.0))]).unwrap();
        let prod = (&a * &b).to_dense();
        let dense = a.to_dense() * b.to_dense();
        assert!(crate::state::max_abs(&(prod - dense)) < 1e-15);
    }

    #[test]
    fn dense_block_product() {
        let a = Csr::from_triplets(2, 3, [(0, 2, c(2.0)), (1, 0, c(1.0))]).unwrap();
        // 3 x 2 row-major
        let m = [c(1.0), c(2.0), c(3.0), c(4.0), c(5.0), c(6.0)];
        let mut out = vec![c(0.0); 4];
        a.mul_dense_rowmajor_acc(c(1.0), &m, 2, &mut out);
        assert_eq!(out, vec![c(10.0), c(12.0), c(1.0), c(2.0)]);
    }
}
