//! Dense Hilbert-space operators and the tensor-product structure of the
//! k-copy space.
//!
//! Copy 1 is always the most significant Kronecker factor, so a basis state
//! `|i_1 i_2 ... i_k>` has flat index `sum_l i_l d^(k-l)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::{Matrix, C64};

/// Absolute max-norm tolerance used to accept Hamiltonians as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A square operator on a finite Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(Matrix);

impl Operator {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "operator must be square",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("operator dimension must be positive".into()));
        }
        Ok(Self(matrix))
    }

    /// Builds an operator from row-major real entries.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), dim * dim, "expected {} entries", dim * dim);
        Self(DMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(Matrix::zeros(dim, dim))
    }

    /// `|i><j|` on a `dim`-dimensional space.
    pub fn outer(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        m[(i, j)] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(&self.0 * z)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `max |A - A^dagger|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() < HERMITIAN_TOL
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }
}

pub(crate) fn hermiticity_error(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub(crate) fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        Operator(self.0 + rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        Operator(self.0 - rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        Operator(self.0 * rhs.0)
    }
}

impl Mul<&Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

impl Mul<Operator> for C64 {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        rhs.scale(self)
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-self.0)
    }
}

/// Kronecker product `a ⊗ b`, with `a` the most significant factor.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator(a.0.kronecker(&b.0))
}

/// `I^(l-1) ⊗ a ⊗ I^(k-l)` on `k` copies of a `d`-dimensional system.
///
/// Copies are numbered from 1.
pub fn embed(a: &Operator, copy: usize, copies: usize, local_dim: usize) -> Result<Operator> {
    if a.dim() != local_dim {
        return Err(Error::DimensionMismatch {
            context: "embed: operator vs local dimension",
            expected: local_dim,
            found: a.dim(),
        });
    }
    if copy == 0 || copy > copies {
        return Err(Error::CopyIndex { index: copy, copies });
    }
    let left = local_dim.pow(copy as u32 - 1);
    let right = local_dim.pow((copies - copy) as u32);
    let mut out = a.0.clone();
    if left > 1 {
        out = Matrix::identity(left, left).kronecker(&out);
    }
    if right > 1 {
        out = out.kronecker(&Matrix::identity(right, right));
    }
    Ok(Operator(out))
}

/// Two-level lowering operator `|g><e|` with `|g> = 0`, `|e> = 1`.
pub fn sigma_minus() -> Operator {
    Operator::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0])
}

pub fn sigma_plus() -> Operator {
    sigma_minus().dagger()
}

pub fn sigma_x() -> Operator {
    Operator::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn sigma_y() -> Operator {
    let mut m = Matrix::zeros(2, 2);
    m[(0, 1)] = C64::new(0.0, -1.0);
    m[(1, 0)] = C64::new(0.0, 1.0);
    Operator(m)
}

/// `diag(1, -1)` in the `(|g>, |e>)` ordering used throughout, i.e. `|g><g| - |e><e|`.
pub fn sigma_z() -> Operator {
    Operator::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0])
}

/// Truncated bosonic annihilation operator on Fock states `0..=cutoff`.
pub fn annihilation(cutoff: usize) -> Operator {
    let dim = cutoff + 1;
    let mut m = Matrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let out = kron(&Operator::identity(2), &Operator::identity(2));
        assert_eq!(out, Operator::identity(4));
    }

    #[test]
    fn kron_sigma_z_identity_is_diagonal() {
        let out = kron(&sigma_z(), &Operator::identity(2));
        let expected = Operator::from_real_rows(
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, -1.0, 0.0, //
                0.0, 0.0, 0.0, -1.0,
            ],
        );
        assert_eq!(out, expected);
    }

    #[test]
    fn kron_lowering_takes_ee_to_gg() {
        let sm2 = kron(&sigma_minus(), &sigma_minus());
        // |ee> = index 3, |gg> = index 0
        let mut ee = nalgebra::DVector::<C64>::zeros(4);
        ee[3] = c(1.0);
        let out = sm2.matrix() * ee;
        assert_eq!(out[0], c(1.0));
        assert!(out.iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn embed_single_copy_is_identity_map() {
        assert_eq!(embed(&sigma_minus(), 1, 1, 2).unwrap(), sigma_minus());
    }

    #[test]
    fn embed_second_copy() {
        let out = embed(&sigma_z(), 2, 2, 2).unwrap();
        assert_eq!(out, kron(&Operator::identity(2), &sigma_z()));
    }

    #[test]
    fn embedded_operators_on_distinct_copies_commute() {
        let a = Operator::new(Matrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.3, j as f64 - 1.0)))
            .unwrap();
        let b = Operator::new(Matrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.5))).unwrap();
        let ea = embed(&a, 1, 2, 3).unwrap();
        let eb = embed(&b, 2, 2, 3).unwrap();
        assert!(max_abs(ea.commutator(&eb).matrix()) < 1e-12);
    }

    #[test]
    fn embed_rejects_bad_input() {
        assert!(matches!(
            embed(&sigma_minus(), 0, 2, 2),
            Err(Error::CopyIndex { .. })
        ));
        assert!(matches!(
            embed(&sigma_minus(), 3, 2, 2),
            Err(Error::CopyIndex { .. })
        ));
        assert!(matches!(
            embed(&sigma_minus(), 1, 2, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn truncated_commutator_is_identity_below_cutoff() {
        let a = annihilation(4);
        let comm = a.commutator(&a.dagger());
        for n in 0..4 {
            assert!((comm.matrix()[(n, n)] - c(1.0)).norm() < 1e-14);
        }
        assert!((comm.matrix()[(4, 4)] - c(-4.0)).norm() < 1e-14);
    }

    #[test]
    fn cutoff_one_is_sigma_minus() {
        assert_eq!(annihilation(1), sigma_minus());
    }
}
