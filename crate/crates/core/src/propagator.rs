//! Flows of constant generators and the k-copy propagator over one delay
//! interval.
//!
//! Two integrators are available. [`Integrator::Rk4`] is classical fixed-step
//! fourth-order Runge-Kutta on the matrix ODE. [`Integrator::Exponential`]
//! evaluates `exp(t L)` exactly up to a truncation tolerance: densely through
//! scaling and squaring in [`flow`], and as a truncated Taylor series of the
//! action `exp(t L) X` with a shifted, sub-stepped argument in [`flow_apply`].

use crate::budget::MemoryBudget;
use crate::cascade::PiecewiseGenerator;
use crate::error::{Error, Result};
use crate::superop::{unvec, vec_of, SparseMatrix, SuperOperator};
use crate::{Matrix, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Norm of `t (L - mu I)` handled by one Taylor sub-step.
const TAYLOR_THETA: f64 = 6.0;
const TAYLOR_MAX_TERMS: usize = 60;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    /// Fixed-step RK4. Without an explicit bound the step is
    /// `min(horizon / 200, 0.01 / ||L||_inf)`.
    Rk4 { max_step: Option<f64> },
    /// Exponential of the generator, truncated at relative `tolerance`.
    Exponential { tolerance: f64 },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Exponential {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl Integrator {
    pub fn rk4() -> Self {
        Integrator::Rk4 { max_step: None }
    }

    /// Sets the truncation tolerance. RK4 keeps its step rule.
    pub fn with_tolerance(self, tol: f64) -> Self {
        match self {
            Integrator::Exponential { .. } => Integrator::Exponential { tolerance: tol },
            rk4 => rk4,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Integrator::Rk4 { max_step: Some(h) } if !(h > 0.0 && h.is_finite()) => {
                Err(Error::InvalidParameter(format!("RK4 step must be positive, got {h}")))
            }
            Integrator::Exponential { tolerance } if !(tolerance > 0.0 && tolerance < 1.0) => Err(
                Error::InvalidParameter(format!("tolerance must lie in (0, 1), got {tolerance}")),
            ),
            _ => Ok(()),
        }
    }
}

/// RK4 step count for `duration` under the default rule with the given horizon.
fn rk4_steps(l: &SparseMatrix, duration: f64, horizon: f64, max_step: Option<f64>) -> Result<usize> {
    let h = match max_step {
        Some(h) => h,
        None => {
            let norm = l.norm_inf();
            let by_norm = if norm > 0.0 { 0.01 / norm } else { f64::INFINITY };
            (horizon / 200.0).min(by_norm)
        }
    };
    if !(h > 16.0 * f64::EPSILON * duration) {
        return Err(Error::StepUnderflow { step: h });
    }
    Ok(((duration / h).ceil() as usize).max(1))
}

/// `y += a x`.
fn axpy(y: &mut Matrix, a: C64, x: &Matrix) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += a * xi;
    }
}

fn rk4_apply(l: &SparseMatrix, duration: f64, x: &Matrix, steps: usize) -> Matrix {
    let h = duration / steps as f64;
    let hc = C64::new(h, 0.0);
    let (n, m) = x.shape();
    let mut y = x.clone();
    let mut k = Matrix::zeros(n, m);
    let mut stage = Matrix::zeros(n, m);
    let mut acc = Matrix::zeros(n, m);
    for _ in 0..steps {
        // k1
        l.mul_dense_into(&y, &mut k, hc, ZERO);
        acc.copy_from(&k);
        stage.copy_from(&y);
        axpy(&mut stage, C64::new(0.5, 0.0), &k);
        // k2
        l.mul_dense_into(&stage, &mut k, hc, ZERO);
        axpy(&mut acc, C64::new(2.0, 0.0), &k);
        stage.copy_from(&y);
        axpy(&mut stage, C64::new(0.5, 0.0), &k);
        // k3
        l.mul_dense_into(&stage, &mut k, hc, ZERO);
        axpy(&mut acc, C64::new(2.0, 0.0), &k);
        stage.copy_from(&y);
        axpy(&mut stage, ONE, &k);
        // k4
        l.mul_dense_into(&stage, &mut k, hc, ZERO);
        axpy(&mut acc, ONE, &k);
        axpy(&mut y, C64::new(1.0 / 6.0, 0.0), &acc);
    }
    y
}

fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(duration L) X` by a truncated Taylor series of the shifted generator.
fn taylor_apply(l: &SparseMatrix, duration: f64, x: &Matrix, tol: f64) -> Matrix {
    let mu = l.diagonal_mean();
    let norm = (l.norm_one() + mu.norm()) * duration;
    let substeps = ((norm / TAYLOR_THETA).ceil() as usize).max(1);
    let h = duration / substeps as f64;
    let eta = (mu * h).exp();
    let (n, m) = x.shape();
    let mut f = x.clone();
    let mut term = Matrix::zeros(n, m);
    let mut next = Matrix::zeros(n, m);
    for _ in 0..substeps {
        term.copy_from(&f);
        let mut prev_small = false;
        for j in 1..=TAYLOR_MAX_TERMS {
            l.mul_dense_into(&term, &mut next, C64::new(h / j as f64, 0.0), mu);
            std::mem::swap(&mut term, &mut next);
            f += &term;
            let small = frobenius(&term) <= tol * frobenius(&f);
            if small && prev_small {
                break;
            }
            prev_small = small;
        }
        f *= eta;
    }
    f
}

fn check_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if duration >= 0.0 && duration.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("flow duration must be >= 0, got {duration}")))
    }
}

pub(crate) fn flow_apply_with_horizon(
    l: &SuperOperator,
    duration: f64,
    x: &Matrix,
    method: Integrator,
    horizon: f64,
) -> Result<Matrix> {
    check_duration(duration)?;
    method.validate()?;
    if x.nrows() != l.liouville_dim() {
        return Err(Error::DimensionMismatch {
            context: "flow_apply: block rows vs generator",
            expected: l.liouville_dim(),
            found: x.nrows(),
        });
    }
    if duration == 0.0 || l.matrix().nnz() == 0 {
        return Ok(x.clone());
    }
    let out = match method {
        Integrator::Rk4 { max_step } => {
            let steps = rk4_steps(l.matrix(), duration, horizon, max_step)?;
            rk4_apply(l.matrix(), duration, x, steps)
        }
        Integrator::Exponential { tolerance } => taylor_apply(l.matrix(), duration, x, tolerance),
    };
    check_finite(&out, "flow")?;
    Ok(out)
}

/// `exp(duration L) X` for a block `X` of Liouville-space columns.
pub fn flow_apply(l: &SuperOperator, duration: f64, x: &Matrix, method: Integrator) -> Result<Matrix> {
    flow_apply_with_horizon(l, duration, x, method, duration)
}

/// Dense matrix of `exp(duration L)`.
pub fn flow(l: &SuperOperator, duration: f64, method: Integrator) -> Result<Matrix> {
    check_duration(duration)?;
    method.validate()?;
    let n = l.liouville_dim();
    let out = match method {
        Integrator::Rk4 { .. } => return flow_apply(l, duration, &Matrix::identity(n, n), method),
        Integrator::Exponential { .. } => {
            if duration == 0.0 {
                return Ok(Matrix::identity(n, n));
            }
            (l.to_dense() * C64::new(duration, 0.0)).exp()
        }
    };
    check_finite(&out, "flow")?;
    Ok(out)
}

/// The k-copy propagator `E_tau(t)` as a `d^(2k) x d^(2k)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatorMatrix {
    copies: usize,
    local_dim: usize,
    matrix: Matrix,
}

impl PropagatorMatrix {
    pub fn identity(local_dim: usize, copies: usize) -> Self {
        let n = crate::budget::liouville_dim(local_dim, copies);
        Self {
            copies,
            local_dim,
            matrix: Matrix::identity(n, n),
        }
    }

    pub fn from_matrix(local_dim: usize, copies: usize, matrix: Matrix) -> Result<Self> {
        let n = crate::budget::liouville_dim(local_dim, copies);
        if matrix.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                context: "propagator matrix vs d^(2k)",
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            copies,
            local_dim,
            matrix,
        })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Hilbert dimension of the k-copy space, `d^k`.
    pub fn hilbert_dim(&self) -> usize {
        self.local_dim.pow(self.copies as u32)
    }

    /// Applies the map to a k-copy operator.
    pub fn apply(&self, rho: &Matrix) -> Matrix {
        let v = nalgebra::DVector::from_vec(vec_of(rho));
        let out = &self.matrix * v;
        unvec(out.as_slice(), self.hilbert_dim())
    }
}

/// `E_tau(t) = Phi_reduced(tau - s*) Phi_full(s*)`.
pub fn evolve_propagator(gen: &PiecewiseGenerator, method: Integrator, budget: &MemoryBudget) -> Result<PropagatorMatrix> {
    let (d, k) = (gen.local_dim(), gen.copies());
    budget.check_propagator(d, k)?;
    let n = crate::budget::liouville_dim(d, k);
    let tau = gen.tau();
    let s = gen.s_star();
    let after_full = flow_apply_with_horizon(gen.full(), s, &Matrix::identity(n, n), method, tau)?;
    let m = flow_apply_with_horizon(gen.reduced(), tau - s, &after_full, method, tau)?;
    PropagatorMatrix::from_matrix(d, k, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_generator, build_generator_with_switch, FeedbackSystem};
    use crate::operator::{max_abs, sigma_minus, sigma_x, sigma_y, sigma_z, Operator};
    use crate::state::min_eigenvalue;
    use crate::superop::ham_super;
    use crate::testutil::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const EXP: Integrator = Integrator::Exponential { tolerance: 1e-14 };

    fn atom(drive: f64) -> FeedbackSystem {
        FeedbackSystem::new(sigma_x().scale(C64::new(drive, 0.0)), sigma_minus(), sigma_minus(), 1.0, 1.0, PI, 1.0)
            .unwrap()
    }

    #[test]
    fn zero_duration_and_zero_generator_give_identity() {
        let mut r = rng(1);
        let l = random_lindbladian(&mut r, 3);
        for m in [EXP, Integrator::rk4()] {
            assert_eq!(flow(&l, 0.0, m).unwrap(), Matrix::identity(9, 9));
            let z = SuperOperator::zeros(3);
            assert_eq!(flow(&z, 2.5, m).unwrap(), Matrix::identity(9, 9));
        }
        assert!(flow(&l, -1.0, EXP).is_err());
    }

    #[test]
    fn sigma_z_rotation() {
        // -(i/2)[sz, .] turns sx into sy after pi/2; -i[sz, .] after pi/4
        let half = ham_super(&sigma_z()).scale(C64::new(0.0, -0.5));
        let full = ham_super(&sigma_z()).scale(C64::new(0.0, -1.0));
        for m in [EXP, Integrator::rk4()] {
            for (l, t) in [(&half, PI / 2.0), (&full, PI / 4.0)] {
                let phi = flow(l, t, m).unwrap();
                let out = unvec((&phi * nalgebra::DVector::from_vec(vec_of(sigma_x().matrix()))).as_slice(), 2);
                assert!(max_abs(&(out - sigma_y().matrix())) < 1e-9);
            }
        }
    }

    #[test]
    fn rk4_matches_matrix_exponential_on_random_lindbladian() {
        let mut r = rng(2);
        let l = random_lindbladian(&mut r, 4);
        let a = flow(&l, 1.0, Integrator::rk4()).unwrap();
        let b = flow(&l, 1.0, EXP).unwrap();
        assert!(max_abs(&(a - &b)) < 1e-8);
        let c = flow_apply(&l, 1.0, &Matrix::identity(16, 16), EXP).unwrap();
        assert!(max_abs(&(c - &b)) < 1e-11);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut r = rng(4);
        let l = random_lindbladian(&mut r, 3);
        let exact = flow(&l, 1.0, EXP).unwrap();
        let x = Matrix::identity(9, 9);
        let err = |h: f64| {
            let out = flow_apply(&l, 1.0, &x, Integrator::Rk4 { max_step: Some(h) }).unwrap();
            max_abs(&(out - &exact))
        };
        let h = 0.5 / l.matrix().norm_inf();
        let order = (err(h) / err(h / 2.0)).log2();
        assert!((order - 4.0).abs() < 0.3, "measured order {order}");
    }

    #[test]
    fn taylor_action_handles_stiff_generators() {
        let mut r = rng(6);
        let l = random_lindbladian(&mut r, 3).scale(C64::new(40.0, 0.0));
        let x = random_matrix(&mut r, 9, 4);
        let dense = flow(&l, 1.3, EXP).unwrap() * &x;
        let act = flow_apply(&l, 1.3, &x, EXP).unwrap();
        assert!(max_abs(&(act - &dense)) < 1e-9 * max_abs(&dense).max(1.0));
    }

    #[test]
    fn single_copy_decay_at_total_rate() {
        let sys = atom(0.0);
        for t in [0.0, 0.3, 0.7, 0.99] {
            let gen = build_generator(&sys, 1, t).unwrap();
            for m in [EXP, Integrator::rk4()] {
                let e = evolve_propagator(&gen, m, &MemoryBudget::default()).unwrap();
                let out = e.apply(crate::state::DensityMatrix::basis(2, 1).matrix());
                assert!((out[(1, 1)].re - (-2.0 * t).exp()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn switch_at_zero_leaves_last_copy_untouched() {
        let sys = atom(PI);
        let gen = build_generator_with_switch(&sys, 2, 0.0).unwrap();
        let e = evolve_propagator(&gen, EXP, &MemoryBudget::default()).unwrap();
        let mut r = rng(8);
        let (a, b) = (random_density(&mut r, 2), random_density(&mut r, 2));
        let out = e.apply(&a.kronecker(&b));
        assert!(max_abs(&(trace_leading(&out, 2, 2) - &b)) < 1e-12);
    }

    #[test]
    fn propagator_preserves_trace_and_hermiticity() {
        let mut r = rng(10);
        let sys = FeedbackSystem::new(
            random_hermitian(&mut r, 2),
            random_operator(&mut r, 2),
            random_operator(&mut r, 2),
            1.0,
            0.8,
            1.7,
            1.0,
        )
        .unwrap();
        for (k, t) in [(1, 0.4), (2, 1.6)] {
            let gen = build_generator(&sys, k, t).unwrap();
            let e = evolve_propagator(&gen, EXP, &MemoryBudget::default()).unwrap();
            for _ in 0..4 {
                let out = e.apply(&random_density(&mut r, 2usize.pow(k as u32)));
                assert!((out.trace() - ONE).norm() < 1e-8);
                assert!(crate::operator::hermiticity_error(&out) < 1e-8);
            }
        }
    }

    #[test]
    fn single_copy_propagator_is_completely_positive() {
        let mut r = rng(12);
        let sys = FeedbackSystem::new(
            random_hermitian(&mut r, 2),
            random_operator(&mut r, 2),
            random_operator(&mut r, 2),
            1.3,
            0.6,
            0.4,
            1.0,
        )
        .unwrap();
        let gen = build_generator(&sys, 1, 0.8).unwrap();
        let e = evolve_propagator(&gen, EXP, &MemoryBudget::default()).unwrap();
        let d = 2;
        let mut choi = Matrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let out = e.apply(Operator::outer(d, i, j).matrix());
                for a in 0..d {
                    for b in 0..d {
                        choi[(i * d + a, j * d + b)] = out[(a, b)];
                    }
                }
            }
        }
        assert!(min_eigenvalue(&choi) > -1e-8);
    }

    #[test]
    fn budget_refuses_large_propagators() {
        let gen = build_generator(&atom(1.0), 3, 2.5).unwrap();
        let small = MemoryBudget::default().with_max_propagator_dim(16);
        assert!(matches!(
            evolve_propagator(&gen, EXP, &small),
            Err(Error::BudgetExceeded { copies: 3, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn semigroup_on_constant_pieces(seed in any::<u64>(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, rk in any::<bool>()) {
            let mut r = rng(seed);
            let l = random_lindbladian(&mut r, 2);
            let m = if rk { Integrator::rk4() } else { EXP };
            let both = flow(&l, t1 + t2, m).unwrap();
            let split = flow(&l, t2, m).unwrap() * flow(&l, t1, m).unwrap();
            prop_assert!(max_abs(&(both - split)) < 1e-8);
        }
    }
}
