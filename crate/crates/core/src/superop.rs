//! Liouville-space superoperators.
//!
//! Operators are vectorized by column stacking, `vec(rho)[r + c * D] = rho[r, c]`,
//! which is exactly the column-major storage of [`Matrix`]. With this convention
//! `vec(X rho Y) = (Y^T ⊗ X) vec(rho)`.

use crate::error::{Error, Result};
use crate::operator::Operator;
use crate::{Matrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![C64::new(1.0, 0.0); n],
        }
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Self {
        let mut trips: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &trips {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
        }
        trips.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values = Vec::with_capacity(trips.len());
        let mut push = |r: usize, c: usize, v: C64| {
            if v != ZERO {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        };
        let mut iter = trips.into_iter();
        if let Some((mut r0, mut c0, mut acc)) = iter.next() {
            for (r, c, v) in iter {
                if (r, c) == (r0, c0) {
                    acc += v;
                } else {
                    push(r0, c0, acc);
                    (r0, c0, acc) = (r, c, v);
                }
            }
            push(r0, c0, acc);
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let trips = (0..m.ncols()).flat_map(|c| (0..m.nrows()).map(move |r| (r, c, m[(r, c)])));
        Self::from_triplets(m.nrows(), m.ncols(), trips)
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

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= z);
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, c, v) in self.triplets() {
            sums[c] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.norm()).sum())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let diff = self.add(&other.scale(C64::new(-1.0, 0.0)));
        diff.values.iter().fold(0.0, |acc, v| acc.max(v.norm()))
    }

    /// Mean of the diagonal (zero for non-square matrices).
    pub fn diagonal_mean(&self) -> C64 {
        if self.nrows != self.ncols || self.nrows == 0 {
            return ZERO;
        }
        let mut sum = ZERO;
        for r in 0..self.nrows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[p] == r {
                    sum += self.values[p];
                }
            }
        }
        sum / self.nrows as f64
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.mul_vec_into(x, &mut y, C64::new(1.0, 0.0), ZERO);
        y
    }

    /// `y = alpha * (A - shift I) x`.
    #[inline]
    pub(crate) fn mul_vec_into(&self, x: &[C64], y: &mut [C64], alpha: C64, shift: C64) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            if shift != ZERO {
                acc -= shift * x[r];
            }
            *yr = alpha * acc;
        }
    }

    /// Dense product `A X`.
    pub fn mul_dense(&self, x: &Matrix) -> Matrix {
        let mut y = Matrix::zeros(self.nrows, x.ncols());
        self.mul_dense_into(x, &mut y, C64::new(1.0, 0.0), ZERO);
        y
    }

    /// `Y = alpha * (A - shift I) X`, column by column.
    pub(crate) fn mul_dense_into(&self, x: &Matrix, y: &mut Matrix, alpha: C64, shift: C64) {
        assert_eq!(x.nrows(), self.ncols);
        assert_eq!((y.nrows(), y.ncols()), (self.nrows, x.ncols()));
        let n_in = self.ncols;
        let n_out = self.nrows;
        let xs = x.as_slice();
        let ys = y.as_mut_slice();
        for (xc, yc) in xs.chunks_exact(n_in).zip(ys.chunks_exact_mut(n_out)) {
            self.mul_vec_into(xc, yc, alpha, shift);
        }
    }
}

/// A superoperator on operators over a `hilbert_dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    hilbert_dim: usize,
    matrix: SparseMatrix,
}

impl SuperOperator {
    pub fn from_sparse(hilbert_dim: usize, matrix: SparseMatrix) -> Result<Self> {
        let ld = hilbert_dim * hilbert_dim;
        if matrix.nrows() != ld || matrix.ncols() != ld {
            return Err(Error::DimensionMismatch {
                context: "superoperator size vs hilbert_dim^2",
                expected: ld,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            hilbert_dim,
            matrix,
        })
    }

    pub fn zeros(hilbert_dim: usize) -> Self {
        let ld = hilbert_dim * hilbert_dim;
        Self {
            hilbert_dim,
            matrix: SparseMatrix::zeros(ld, ld),
        }
    }

    pub fn identity(hilbert_dim: usize) -> Self {
        Self {
            hilbert_dim,
            matrix: SparseMatrix::identity(hilbert_dim * hilbert_dim),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn liouville_dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> Matrix {
        self.matrix.to_dense()
    }

    pub fn scale(&self, z: C64) -> Self {
        Self {
            hilbert_dim: self.hilbert_dim,
            matrix: self.matrix.scale(z),
        }
    }

    pub fn add(&self, other: &SuperOperator) -> Self {
        assert_eq!(self.hilbert_dim, other.hilbert_dim);
        Self {
            hilbert_dim: self.hilbert_dim,
            matrix: self.matrix.add(&other.matrix),
        }
    }

    /// Hilbert–Schmidt adjoint (Heisenberg-picture generator).
    pub fn adjoint(&self) -> Self {
        Self {
            hilbert_dim: self.hilbert_dim,
            matrix: self.matrix.adjoint(),
        }
    }

    /// Applies the superoperator to an operator, `unvec(S vec(rho))`.
    pub fn apply(&self, rho: &Matrix) -> Matrix {
        assert_eq!(rho.nrows(), self.hilbert_dim);
        unvec(&self.matrix.mul_vec(&vec_of(rho)), self.hilbert_dim)
    }

    pub fn max_abs_diff(&self, other: &SuperOperator) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }
}

/// Column-stacking vectorization.
pub fn vec_of(rho: &Matrix) -> Vec<C64> {
    rho.as_slice().to_vec()
}

/// Inverse of [`vec_of`] for a `dim x dim` operator.
pub fn unvec(v: &[C64], dim: usize) -> Matrix {
    assert_eq!(v.len(), dim * dim, "vector length is not dim^2");
    Matrix::from_column_slice(dim, dim, v)
}

fn nonzeros(m: &Matrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != ZERO {
                out.push((r, c, v));
            }
        }
    }
    out
}

pub(crate) fn lmult_triplets(x: &Matrix, scale: C64) -> Vec<(usize, usize, C64)> {
    let d = x.nrows();
    let nz = nonzeros(x);
    let mut trips = Vec::with_capacity(nz.len() * d);
    // (x rho)[r', c] = sum_r x[r', r] rho[r, c]
    for c in 0..d {
        for &(rp, r, v) in &nz {
            trips.push((rp + c * d, r + c * d, scale * v));
        }
    }
    trips
}

pub(crate) fn rmult_triplets(y: &Matrix, scale: C64) -> Vec<(usize, usize, C64)> {
    let d = y.nrows();
    let nz = nonzeros(y);
    let mut trips = Vec::with_capacity(nz.len() * d);
    // (rho y)[r, c'] = sum_c rho[r, c] y[c, c']
    for &(c, cp, v) in &nz {
        for r in 0..d {
            trips.push((r + cp * d, r + c * d, scale * v));
        }
    }
    trips
}

/// `rho -> x rho`, i.e. `I ⊗ x` under column stacking.
pub fn lmult(x: &Operator) -> SuperOperator {
    let d = x.dim();
    SuperOperator {
        hilbert_dim: d,
        matrix: SparseMatrix::from_triplets(d * d, d * d, lmult_triplets(x.matrix(), C64::new(1.0, 0.0))),
    }
}

/// `rho -> rho y`, i.e. `y^T ⊗ I` under column stacking.
pub fn rmult(y: &Operator) -> SuperOperator {
    let d = y.dim();
    SuperOperator {
        hilbert_dim: d,
        matrix: SparseMatrix::from_triplets(d * d, d * d, rmult_triplets(y.matrix(), C64::new(1.0, 0.0))),
    }
}

/// Commutator superoperator `rho -> [x, rho]`.
pub fn ham_super(x: &Operator) -> SuperOperator {
    scaled_ham_super(x, C64::new(1.0, 0.0))
}

pub(crate) fn scaled_ham_super(x: &Operator, scale: C64) -> SuperOperator {
    let d = x.dim();
    let mut trips = lmult_triplets(x.matrix(), scale);
    trips.extend(rmult_triplets(x.matrix(), -scale));
    SuperOperator {
        hilbert_dim: d,
        matrix: SparseMatrix::from_triplets(d * d, d * d, trips),
    }
}

/// Lindblad dissipator `rho -> x rho x† - ½ x†x rho - ½ rho x†x`.
pub fn dissipator_super(x: &Operator) -> SuperOperator {
    let d = x.dim();
    SuperOperator {
        hilbert_dim: d,
        matrix: SparseMatrix::from_triplets(d * d, d * d, dissipator_triplets(x.matrix())),
    }
}

pub(crate) fn dissipator_triplets(x: &Matrix) -> Vec<(usize, usize, C64)> {
    let d = x.nrows();
    let nz = nonzeros(x);
    let xdx = x.adjoint() * x;
    let half = C64::new(-0.5, 0.0);
    let mut trips = lmult_triplets(&xdx, half);
    trips.extend(rmult_triplets(&xdx, half));
    // (x rho x†)[r', c'] = sum x[r', r] rho[r, c] conj(x[c', c])
    trips.reserve(nz.len() * nz.len());
    for &(rp, r, a) in &nz {
        for &(cp, c, b) in &nz {
            trips.push((rp + cp * d, r + c * d, a * b.conj()));
        }
    }
    trips
}

/// Lindbladian `-i[h, .] + sum_j D[l_j]`.
pub fn lindbladian(h: &Operator, jumps: &[Operator]) -> SuperOperator {
    let d = h.dim();
    let mut trips = lmult_triplets(h.matrix(), C64::new(0.0, -1.0));
    trips.extend(rmult_triplets(h.matrix(), C64::new(0.0, 1.0)));
    for l in jumps {
        trips.extend(dissipator_triplets(l.matrix()));
    }
    SuperOperator {
        hilbert_dim: d,
        matrix: SparseMatrix::from_triplets(d * d, d * d, trips),
    }
}
