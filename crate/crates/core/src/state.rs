//! Density matrices and the spectral diagnostics used on every sample.

use crate::error::{Error, Result};
use crate::operator::hermiticity_error;
use crate::{Matrix, C64};

/// Trace deviation accepted for user-supplied states.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for user-supplied states.
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// (up to the tolerances above).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix);

impl DensityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidState(format!(
                "expected a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_error(&matrix);
        if herm > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min_eig = min_eigenvalue(&matrix);
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self(matrix))
    }

    /// Computational basis projector `|i><i|`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// Normalized pure state `|psi><psi|`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("pure state has zero norm".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Self::new(&v * v.adjoint())
    }

    /// Coherent state on Fock levels `0..=cutoff`, renormalized after truncation.
    pub fn coherent(cutoff: usize, alpha: C64) -> Result<Self> {
        let mut amp = Vec::with_capacity(cutoff + 1);
        let mut c = C64::new(1.0, 0.0);
        for n in 0..=cutoff {
            if n > 0 {
                c *= alpha / (n as f64).sqrt();
            }
            amp.push(c);
        }
        Self::pure(&amp)
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
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &Matrix) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Per-sample health numbers for a reduced state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    /// `|Tr rho - 1|`.
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    /// `max |rho - rho^dagger|`.
    pub hermiticity_error: f64,
}

impl StateDiagnostics {
    pub fn of(rho: &Matrix) -> Self {
        Self {
            trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
            min_eigenvalue: min_eigenvalue(rho),
            hermiticity_error: hermiticity_error(rho),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_basis_and_mixed_states() {
        assert!(DensityMatrix::new(DensityMatrix::basis(3, 2).into_matrix()).is_ok());
        let mixed = Matrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(mixed).is_ok());
    }

    #[test]
    fn rejects_unnormalized_state() {
        let m = Matrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(m), Err(Error::InvalidState(_))));
    }

    #[test]
    fn rejects_negative_state() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn coherent_state_mean_amplitude() {
        let rho = DensityMatrix::coherent(12, C64::new(0.5, 0.0)).unwrap();
        let a = crate::operator::annihilation(12);
        let mean = (a.matrix() * rho.matrix()).trace();
        assert!((mean - C64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn min_eigenvalue_of_diagonal() {
        let mut m = Matrix::zeros(3, 3);
        m[(0, 0)] = C64::new(0.7, 0.0);
        m[(1, 1)] = C64::new(0.4, 0.0);
        m[(2, 2)] = C64::new(-0.1, 0.0);
        assert!((min_eigenvalue(&m) + 0.1).abs() < 1e-14);
    }
}
