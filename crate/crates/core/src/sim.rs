//! Time-grid orchestration: reduced states `rho_S(t)` for a list of output
//! times, with observables and per-sample diagnostics.
//!
//! Samples are grouped by copy window. Within a window only the columns of
//! the propagator that see `rho0` on copy 1 are needed, so the engine evolves
//! the block `X(s) = Phi_full(s) (rho0 ⊗ basis of copies 2..k)` forward in
//! `s`. Because the reduced generator is the previous window's full generator
//! acting on copies `1..k-1`, the second piece only enters through the
//! `(k-1)`-copy flow `Psi = exp((tau - s*) L_full(k-1))`, and the chain
//! contraction collapses to
//! `rho_S[o] = sum_{c, b} Psi[c, b] X[(b, o), c]`.

use crate::budget::{MemoryBudget, REDUCED_FLOW_SLOTS};
use crate::cascade::{cascade_liouvillian, copies_for_time, FeedbackSystem};
use crate::error::{Error, Result};
use crate::gtrace::{contract_chain, ContractionOrder};
use crate::operator::{annihilation, Operator};
use crate::propagator::{evolve_propagator, flow_apply, Integrator};
use crate::state::{DensityMatrix, StateDiagnostics};
use crate::superop::{lindbladian, unvec, vec_of};
use crate::{Matrix, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Sampled reduced dynamics.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Matrix>,
    /// Copy count used for each sample.
    pub copies: Vec<usize>,
    pub diagnostics: Vec<StateDiagnostics>,
    pub observables: Vec<(String, Vec<C64>)>,
}

impl Trajectory {
    fn with_observables(names: &[(String, Operator)]) -> Self {
        Self {
            observables: names.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
            ..Default::default()
        }
    }

    pub(crate) fn push_sample(&mut self, t: f64, copies: usize, rho: Matrix, ops: &[(String, Operator)]) {
        for ((_, series), (_, op)) in self.observables.iter_mut().zip(ops) {
            series.push(trace_product(op.matrix(), &rho));
        }
        self.diagnostics.push(StateDiagnostics::of(&rho));
        self.times.push(t);
        self.copies.push(copies);
        self.states.push(rho);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Option<&[C64]> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Population of basis level `level` at every sample.
    pub fn population(&self, level: usize) -> Vec<f64> {
        self.states.iter().map(|r| r[(level, level)].re).collect()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_error).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn max_hermiticity_error(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.hermiticity_error).fold(0.0, f64::max)
    }

    pub fn max_copies(&self) -> usize {
        self.copies.iter().copied().max().unwrap_or(0)
    }
}

fn trace_product(op: &Matrix, rho: &Matrix) -> C64 {
    let n = op.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc
}

/// `Tr(op rho)`.
pub fn expectation(op: &Operator, rho: &Matrix) -> Result<C64> {
    if rho.shape() != (op.dim(), op.dim()) {
        return Err(Error::DimensionMismatch {
            context: "expectation: operator vs state",
            expected: op.dim(),
            found: rho.nrows(),
        });
    }
    Ok(trace_product(op.matrix(), rho))
}

/// Observables recorded by default: `P_e` and `sigma_minus` for a two-level
/// system; `a`, `n` and `top_fock` (population of the highest level) for a
/// truncated oscillator.
pub fn default_observables(local_dim: usize) -> Vec<(String, Operator)> {
    if local_dim == 2 {
        vec![
            ("P_e".into(), Operator::outer(2, 1, 1)),
            ("sigma_minus".into(), crate::operator::sigma_minus()),
        ]
    } else {
        let a = annihilation(local_dim - 1);
        let n = &a.dagger() * &a;
        vec![
            ("a".into(), a),
            ("n".into(), n),
            ("top_fock".into(), Operator::outer(local_dim, local_dim - 1, local_dim - 1)),
        ]
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample time {t} must be finite and >= 0")));
        }
        if i > 0 && t <= times[i - 1] {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
    }
    Ok(())
}

/// Configured engine for one feedback system.
#[derive(Clone, Debug)]
pub struct Simulation {
    system: FeedbackSystem,
    integrator: Integrator,
    budget: MemoryBudget,
    observables: Vec<(String, Operator)>,
}

impl Simulation {
    pub fn new(system: FeedbackSystem) -> Self {
        let observables = default_observables(system.local_dim());
        Self {
            system,
            integrator: Integrator::default(),
            budget: MemoryBudget::default(),
            observables,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_budget(mut self, budget: MemoryBudget) -> Self {
        self.budget = budget;
        self
    }

    /// Replaces the recorded observables.
    pub fn with_observables(mut self, observables: Vec<(String, Operator)>) -> Result<Self> {
        let d = self.system.local_dim();
        if let Some((_, op)) = observables.iter().find(|(_, op)| op.dim() != d) {
            return Err(Error::DimensionMismatch {
                context: "observable vs local dimension",
                expected: d,
                found: op.dim(),
            });
        }
        self.observables = observables;
        Ok(self)
    }

    pub fn system(&self) -> &FeedbackSystem {
        &self.system
    }

    pub fn budget(&self) -> &MemoryBudget {
        &self.budget
    }

    pub fn integrator(&self) -> Integrator {
        self.integrator
    }

    /// Latest time reachable under the budget.
    pub fn max_reachable_time(&self) -> f64 {
        self.budget.max_copies(self.system.local_dim()) as f64 * self.system.tau()
    }

    fn check_rho0(&self, rho0: &DensityMatrix) -> Result<()> {
        if rho0.dim() != self.system.local_dim() {
            return Err(Error::DimensionMismatch {
                context: "initial state vs local dimension",
                expected: self.system.local_dim(),
                found: rho0.dim(),
            });
        }
        Ok(())
    }

    fn budget_error(&self, copies: usize) -> Error {
        let d = self.system.local_dim();
        Error::BudgetExceeded {
            copies,
            local_dim: d,
            required_mb: MemoryBudget::window_bytes(d, copies) >> 20,
            budget_mb: self.budget.megabytes(),
            max_reachable_t: self.max_reachable_time(),
        }
    }

    /// Window and switch time used for `t`. A sample exactly on a boundary
    /// whose window exceeds the budget is taken at the closed end of the
    /// previous window, which gives the same state.
    pub fn window_for(&self, t: f64) -> (usize, f64) {
        let (k, s) = copies_for_time(t, self.system.tau());
        if s == 0.0 && k > 1 && !self.budget.allows_window(self.system.local_dim(), k) {
            (k - 1, self.system.tau())
        } else {
            (k, s)
        }
    }

    /// Runs every sample, failing on the first error.
    pub fn run(&self, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
        match self.run_partial(rho0, times) {
            (traj, None) => Ok(traj),
            (_, Some(err)) => Err(err),
        }
    }

    /// Runs samples in order and stops at the first failing window, returning
    /// what was computed so far together with the error.
    pub fn run_partial(&self, rho0: &DensityMatrix, times: &[f64]) -> (Trajectory, Option<Error>) {
        let mut traj = Trajectory::with_observables(&self.observables);
        if let Err(e) = check_times(times).and_then(|_| self.check_rho0(rho0)) {
            return (traj, Some(e));
        }
        let windows: Vec<(usize, f64)> = times.iter().map(|&t| self.window_for(t)).collect();
        let mut start = 0;
        while start < times.len() {
            let k = windows[start].0;
            let end = start + windows[start..].iter().take_while(|w| w.0 == k).count();
            let s_list: Vec<f64> = windows[start..end].iter().map(|w| w.1).collect();
            match self.window_states(rho0, k, &s_list) {
                Ok(states) => {
                    for (i, rho) in states.into_iter().enumerate() {
                        traj.push_sample(times[start + i], k, rho, &self.observables);
                    }
                }
                Err(e) => return (traj, Some(e)),
            }
            start = end;
        }
        (traj, None)
    }

    /// Reduced state for an explicit copy count and switch time `s* in [0, tau]`.
    pub fn state_in_window(&self, rho0: &DensityMatrix, copies: usize, s_star: f64) -> Result<Matrix> {
        self.check_rho0(rho0)?;
        if !(0.0..=self.system.tau()).contains(&s_star) {
            return Err(Error::InvalidParameter(format!("switch time {s_star} outside [0, tau]")));
        }
        Ok(self.window_states(rho0, copies, &[s_star])?.remove(0))
    }

    /// Reference route: full propagator followed by the chain contraction.
    pub fn state_via_propagator(&self, rho0: &DensityMatrix, t: f64) -> Result<Matrix> {
        self.check_rho0(rho0)?;
        let (k, _) = copies_for_time(t, self.system.tau());
        let gen = crate::cascade::build_generator(&self.system, k, t)?;
        let e = evolve_propagator(&gen, self.integrator, &self.budget)?;
        contract_chain(&e, rho0, ContractionOrder::Forward)
    }

    /// States for ascending switch times `s_list` inside window `copies`.
    fn window_states(&self, rho0: &DensityMatrix, copies: usize, s_list: &[f64]) -> Result<Vec<Matrix>> {
        let sys = &self.system;
        let d = sys.local_dim();
        let tau = sys.tau();
        if copies == 0 {
            return Err(Error::CopyIndex { index: 0, copies });
        }
        if !self.budget.allows_window(d, copies) {
            return Err(self.budget_error(copies));
        }
        let full = cascade_liouvillian(sys, copies, true)?;
        let mut x = initial_block(rho0.matrix(), d, copies);
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(s_list.len());
        if copies == 1 {
            for &s in s_list {
                x = flow_apply(&full, s - prev, &x, self.integrator)?;
                prev = s;
                out.push(unvec(x.as_slice(), d));
            }
            return Ok(out);
        }
        let reduced = cascade_liouvillian(sys, copies - 1, true)?;
        let nb = x.ncols();
        let chunk = REDUCED_FLOW_SLOTS.saturating_sub(3).max(1);
        for block in s_list.chunks(chunk) {
            let last = *block.last().unwrap();
            let mut psis = Vec::with_capacity(block.len());
            psis.push(flow_apply(&reduced, tau - last, &Matrix::identity(nb, nb), self.integrator)?);
            for w in block.windows(2).rev() {
                let next = flow_apply(&reduced, w[1] - w[0], psis.last().unwrap(), self.integrator)?;
                psis.push(next);
            }
            psis.reverse();
            for (&s, psi) in block.iter().zip(psis) {
                x = flow_apply(&full, s - prev, &x, self.integrator)?;
                prev = s;
                out.push(contract_block(&psi.transpose(), &x, d, copies));
            }
        }
        Ok(out)
    }
}

/// Columns `vec(rho0 ⊗ |r><c|)` for every basis operator of copies `2..k`.
fn initial_block(rho0: &Matrix, d: usize, copies: usize) -> Matrix {
    let dr = d.pow(copies as u32 - 1);
    let dk = dr * d;
    let mut b = Matrix::zeros(dk * dk, dr * dr);
    for cc in 0..dr {
        for cr in 0..dr {
            let col = cr + cc * dr;
            for c0 in 0..d {
                for r0 in 0..d {
                    let row = (r0 * dr + cr) + (c0 * dr + cc) * dk;
                    b[(row, col)] = rho0[(r0, c0)];
                }
            }
        }
    }
    b
}

/// `rho[o] = sum_{c, b} Psi[c, b] X[(b, o), c]`, with `psi_t = Psi^T`.
fn contract_block(psi_t: &Matrix, x: &Matrix, d: usize, copies: usize) -> Matrix {
    let dr = d.pow(copies as u32 - 1);
    let dk = dr * d;
    let nb = dr * dr;
    let mut rho = Matrix::zeros(d, d);
    for oc in 0..d {
        for or in 0..d {
            let mut acc = ZERO;
            for c in 0..nb {
                let xc = x.column(c);
                let pc = psi_t.column(c);
                for bc in 0..dr {
                    let base = (bc * d + oc) * dk + or;
                    for br in 0..dr {
                        acc += pc[br + bc * dr] * xc[base + br * d];
                    }
                }
            }
            rho[(or, oc)] = acc;
        }
    }
    rho
}

/// `rho_S(t)` for each sample time with the default engine settings and the
/// budget from the environment.
pub fn simulate(sys: &FeedbackSystem, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    Simulation::new(sys.clone()).with_budget(MemoryBudget::from_env()?).run(rho0, times)
}

/// Single-copy evolution without the loop: `H_S` and one dissipator
/// `sqrt(kappa1 + kappa2) a1`.
pub fn no_feedback_reference(sys: &FeedbackSystem, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    no_feedback_with(sys, rho0, times, Integrator::default())
}

pub fn no_feedback_with(
    sys: &FeedbackSystem,
    rho0: &DensityMatrix,
    times: &[f64],
    integrator: Integrator,
) -> Result<Trajectory> {
    check_times(times)?;
    let d = sys.local_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "initial state vs local dimension",
            expected: d,
            found: rho0.dim(),
        });
    }
    let rate = (sys.kappa1() + sys.kappa2()).sqrt();
    let l = lindbladian(sys.h_s(), &[sys.a1().scale(C64::new(rate, 0.0))]);
    let ops = default_observables(d);
    let mut traj = Trajectory::with_observables(&ops);
    let mut x = Matrix::from_column_slice(d * d, 1, &vec_of(rho0.matrix()));
    let mut prev = 0.0;
    for &t in times {
        x = flow_apply(&l, t - prev, &x, integrator)?;
        prev = t;
        traj.push_sample(t, 1, unvec(x.as_slice(), d), &ops);
    }
    Ok(traj)
}
