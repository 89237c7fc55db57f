//! Random operators and states for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operator::Operator;
use crate::{Matrix, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    })
}

pub fn random_operator(r: &mut impl Rng, dim: usize) -> Operator {
    Operator::new(random_matrix(r, dim, dim)).unwrap()
}

pub fn random_hermitian(r: &mut impl Rng, dim: usize) -> Operator {
    let m = random_matrix(r, dim, dim);
    Operator::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Full-rank random density matrix `G G^dagger / Tr`.
pub fn random_density(r: &mut impl Rng, dim: usize) -> Matrix {
    let g = random_matrix(r, dim, dim);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Traces out the leading `lead`-dimensional factor of a `lead * rest` operator.
pub fn trace_leading(m: &Matrix, lead: usize, rest: usize) -> Matrix {
    Matrix::from_fn(rest, rest, |i, j| (0..lead).map(|a| m[(a * rest + i, a * rest + j)]).sum())
}

/// Random Lindbladian on a `dim`-dimensional space with two jump operators.
pub fn random_lindbladian(r: &mut impl Rng, dim: usize) -> crate::superop::SuperOperator {
    let h = random_hermitian(r, dim);
    let jumps = [random_operator(r, dim), random_operator(r, dim)];
    crate::superop::lindbladian(&h, &jumps)
}
