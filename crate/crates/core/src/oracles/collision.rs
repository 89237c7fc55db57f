//! Time-bin collision model of the delay loop.
//!
//! The field is cut into bins of width `dt = tau / n_bins`. The window holds
//! the `n_bins` bins emitted during the last delay, oldest first. In each
//! step the system interacts with a fresh vacuum bin at the first coupling
//! point and with the oldest stored bin at the second, through
//!
//! `U = exp(-i H_S dt + sqrt(kappa1 dt) (a1 B_new^dag - a1^dag B_new)
//!        + sqrt(kappa2 dt) (e^{i phi} a2 B_old^dag - e^{-i phi} a2^dag B_old))`.
//!
//! The oldest bin is then traced out and the new bin is appended. An optional
//! cap on the total photon number of the stored bins restricts the window to a
//! smaller basis; undriven single-excitation dynamics never leaves the
//! one-photon sector, so a cap of one is exact there.

use std::collections::HashMap;

use crate::budget::MemoryBudget;
use crate::cascade::FeedbackSystem;
use crate::error::{Error, Result};
use crate::operator::annihilation;
use crate::sim::{default_observables, Trajectory};
use crate::state::DensityMatrix;
use crate::{Matrix, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionConfig {
    /// Bins per delay, `n_tau = tau / dt`.
    pub bins_per_delay: usize,
    /// Photon cutoff of a single bin.
    pub max_bin_photons: usize,
    /// Cap on the total photon number in the stored window.
    pub photon_cap: Option<usize>,
    /// Split `H_S` symmetrically around the tap interaction.
    pub strang: bool,
}

impl CollisionConfig {
    pub fn new(bins_per_delay: usize, max_bin_photons: usize) -> Self {
        Self {
            bins_per_delay,
            max_bin_photons,
            photon_cap: None,
            strang: false,
        }
    }

    /// One photon per bin and a one-photon window for undriven two-level
    /// systems, two photons per bin and no cap otherwise.
    pub fn for_system(sys: &FeedbackSystem, bins_per_delay: usize) -> Self {
        if sys.is_undriven() && sys.local_dim() == 2 {
            Self {
                photon_cap: Some(1),
                ..Self::new(bins_per_delay, 1)
            }
        } else {
            Self::new(bins_per_delay, 2)
        }
    }

    pub fn with_photon_cap(mut self, cap: Option<usize>) -> Self {
        self.photon_cap = cap;
        self
    }

    pub fn with_strang(mut self, strang: bool) -> Self {
        self.strang = strang;
        self
    }

    /// Config with twice as many bins per delay.
    pub fn refined(self) -> Self {
        Self {
            bins_per_delay: 2 * self.bins_per_delay,
            ..self
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollisionRun {
    pub trajectory: Trajectory,
    /// System excitation plus photons in the window plus photons already
    /// traced out, per sample.
    pub total_excitation: Vec<f64>,
    /// Largest change of the first observable when the bin width is halved,
    /// if the refined run was performed.
    pub refinement_change: Option<f64>,
    pub warning: Option<String>,
}

/// Basis of the stored window: occupations oldest first, with the maps used
/// to drop the oldest bin and append a new one.
type Spectator = (usize, Vec<Option<usize>>, Vec<Option<usize>>);

struct Layout {
    q: usize,
    configs: Vec<Vec<u8>>,
    /// For each spectator configuration (bins 2..n): its photon count,
    /// the index of `[o_in] ++ m` for each `o_in`, and of `m ++ [n']` for each `n'`.
    spectators: Vec<Spectator>,
}

fn enumerate(len: usize, q: usize, cap: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, len: usize, q: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == len {
            out.push(prefix.clone());
            return;
        }
        for n in 0..q.min(left + 1) {
            prefix.push(n as u8);
            rec(prefix, len, q, left - n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(len), len, q, cap, &mut out);
    out
}

/// Number of window configurations, saturating; avoids enumerating windows
/// that could never fit.
fn count_configs(len: usize, q: usize, cap: usize) -> u128 {
    // ways[s] = configurations of the bins seen so far with s photons
    let cap = cap.min(len * (q - 1));
    let mut ways = vec![0u128; cap + 1];
    ways[0] = 1;
    for _ in 0..len {
        let mut next = vec![0u128; cap + 1];
        for (s, &w) in ways.iter().enumerate() {
            for n in 0..q.min(cap - s + 1) {
                next[s + n] = next[s + n].saturating_add(w);
            }
        }
        ways = next;
    }
    ways.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

impl Layout {
    fn new(n_bins: usize, q: usize, cap: usize) -> Self {
        let configs = enumerate(n_bins, q, cap);
        let index: HashMap<&[u8], usize> = configs.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
        let spectators = enumerate(n_bins - 1, q, cap)
            .into_iter()
            .map(|m| {
                let p: usize = m.iter().map(|&n| n as usize).sum();
                let mut key = Vec::with_capacity(n_bins);
                let old = (0..q)
                    .map(|o| {
                        key.clear();
                        key.push(o as u8);
                        key.extend_from_slice(&m);
                        index.get(key.as_slice()).copied()
                    })
                    .collect();
                let new = (0..q)
                    .map(|n| {
                        key.clear();
                        key.extend_from_slice(&m);
                        key.push(n as u8);
                        index.get(key.as_slice()).copied()
                    })
                    .collect();
                (p, old, new)
            })
            .collect();
        Self { q, configs, spectators }
    }
}

/// Kraus operators `K[p][o][(s', n'), (s, o_in)] = U_p[(s', o, n'), (s, o_in, 0)]`
/// where `U_p` acts on the subspace allowed with `p` photons elsewhere.
fn kraus_sets(sys: &FeedbackSystem, cfg: &CollisionConfig, dt: f64, cap: usize) -> Vec<Vec<Matrix>> {
    let d = sys.local_dim();
    let q = cfg.max_bin_photons + 1;
    let dim = d * q * q;
    let id_d = Matrix::identity(d, d);
    let id_q = Matrix::identity(q, q);
    let b = annihilation(cfg.max_bin_photons).into_matrix();
    // ordering (s, o, n): system most significant, then the old bin, then the new one
    let b_old = id_d.kronecker(&b).kronecker(&id_q);
    let b_new = id_d.kronecker(&id_q).kronecker(&b);
    let lift = |a: &Matrix| a.kronecker(&id_q).kronecker(&id_q);
    let (a1, a2) = (lift(sys.a1().matrix()), lift(sys.a2().matrix()));
    let ph = C64::from_polar(1.0, sys.phi());
    let g1 = C64::new((sys.kappa1() * dt).sqrt(), 0.0);
    let g2 = C64::new((sys.kappa2() * dt).sqrt(), 0.0);
    let taps = (&a1 * b_new.adjoint() - a1.adjoint() * &b_new) * g1
        + (&a2 * b_old.adjoint() * ph - a2.adjoint() * &b_old * ph.conj()) * g2;
    let h = lift(sys.h_s().matrix()) * C64::new(0.0, -dt);
    (0..=cap)
        .map(|p| {
            let room = cap - p;
            let allowed: Vec<bool> = (0..dim).map(|i| (i / q) % q + i % q <= room).collect();
            let project = |m: &Matrix| {
                Matrix::from_fn(dim, dim, |i, j| if allowed[i] && allowed[j] { m[(i, j)] } else { ZERO })
            };
            let u = if cfg.strang {
                let half = (&h * C64::new(0.5, 0.0)).exp();
                &half * project(&taps).exp() * &half
            } else {
                project(&(&h + &taps)).exp()
            };
            (0..q)
                .map(|o| {
                    Matrix::from_fn(d * q, d * q, |r, c| {
                        let (s1, n1) = (r / q, r % q);
                        let (s0, o0) = (c / q, c % q);
                        u[((s1 * q + o) * q + n1, (s0 * q + o0) * q)]
                    })
                })
                .collect()
        })
        .collect()
}

struct Window<'a> {
    layout: &'a Layout,
    d: usize,
    rho: Matrix,
    emitted: f64,
}

impl Window<'_> {
    fn reduced(&self) -> Matrix {
        let d = self.d;
        Matrix::from_fn(d, d, |s, t| (0..self.layout.configs.len()).map(|c| self.rho[(c * d + s, c * d + t)]).sum())
    }

    fn window_photons(&self) -> f64 {
        let d = self.d;
        self.layout
            .configs
            .iter()
            .enumerate()
            .map(|(c, occ)| {
                let n: usize = occ.iter().map(|&n| n as usize).sum();
                let pop: f64 = (0..d).map(|s| self.rho[(c * d + s, c * d + s)].re).sum();
                n as f64 * pop
            })
            .sum()
    }

    fn step(&mut self, kraus: &[Vec<Matrix>]) {
        let (d, q) = (self.d, self.layout.q);
        let n = self.rho.nrows();
        let mut next = Matrix::zeros(n, n);
        let mut a = Matrix::zeros(d * q, d * q);
        let mut emitted = 0.0;
        for (mi, (pi, old_i, new_i)) in self.layout.spectators.iter().enumerate() {
            for (mj, (pj, old_j, new_j)) in self.layout.spectators.iter().enumerate() {
                a.fill(ZERO);
                let mut any = false;
                for (oi, ci) in old_i.iter().enumerate() {
                    let Some(ci) = *ci else { continue };
                    for (oj, cj) in old_j.iter().enumerate() {
                        let Some(cj) = *cj else { continue };
                        for s in 0..d {
                            for t in 0..d {
                                let v = self.rho[(ci * d + s, cj * d + t)];
                                a[(s * q + oi, t * q + oj)] = v;
                                any |= v != ZERO;
                            }
                        }
                    }
                }
                if !any {
                    continue;
                }
                for o in 0..q {
                    let out = &kraus[*pi][o] * &a * kraus[*pj][o].adjoint();
                    if mi == mj && o > 0 {
                        emitted += o as f64 * out.trace().re;
                    }
                    for (n1, c1) in new_i.iter().enumerate() {
                        let Some(c1) = *c1 else { continue };
                        for (n2, c2) in new_j.iter().enumerate() {
                            let Some(c2) = *c2 else { continue };
                            for s in 0..d {
                                for t in 0..d {
                                    next[(c1 * d + s, c2 * d + t)] += out[(s * q + n1, t * q + n2)];
                                }
                            }
                        }
                    }
                }
            }
        }
        self.rho = next;
        self.emitted += emitted;
    }
}

/// Runs the collision model and samples it at the bin boundary nearest to
/// each requested time.
pub fn collision_model(
    sys: &FeedbackSystem,
    rho0: &DensityMatrix,
    cfg: &CollisionConfig,
    times: &[f64],
    budget: &MemoryBudget,
) -> Result<CollisionRun> {
    let d = sys.local_dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "collision model: initial state vs local dimension",
            expected: d,
            found: rho0.dim(),
        });
    }
    let n_bins = cfg.bins_per_delay;
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins per delay, got {n_bins}")));
    }
    if cfg.max_bin_photons == 0 {
        return Err(Error::InvalidParameter("bins need at least one photon level".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) || (i > 0 && t <= times[i - 1]) {
            return Err(Error::InvalidParameter("sample times must be finite, >= 0 and increasing".into()));
        }
    }
    let q = cfg.max_bin_photons + 1;
    let cap = cfg.photon_cap.unwrap_or(n_bins * cfg.max_bin_photons).min(n_bins * cfg.max_bin_photons);
    let configs = count_configs(n_bins, q, cap);
    let dim = configs.saturating_mul(d as u128);
    // the state and its successor
    let required = dim.saturating_mul(dim).saturating_mul(32);
    if required > budget.bytes() as u128 {
        return Err(Error::OracleBudget {
            dim: dim as f64,
            required_mb: (dim as f64).powi(2) * 32.0 / (1u64 << 20) as f64,
            budget_mb: budget.megabytes(),
        });
    }
    let layout = Layout::new(n_bins, q, cap);
    let dt = sys.tau() / n_bins as f64;
    let kraus = kraus_sets(sys, cfg, dt, cap);
    let n_conf = layout.configs.len();
    // start: system in rho0, every stored bin in vacuum (configuration 0)
    let mut rho = Matrix::zeros(n_conf * d, n_conf * d);
    rho.view_mut((0, 0), (d, d)).copy_from(rho0.matrix());
    let mut window = Window {
        layout: &layout,
        d,
        rho,
        emitted: 0.0,
    };
    let ops = default_observables(d);
    let number = sys.a1().dagger() * sys.a1().clone();
    let mut traj = Trajectory {
        observables: ops.iter().map(|(n, _)| (n.clone(), Vec::new())).collect(),
        ..Default::default()
    };
    let mut total = Vec::with_capacity(times.len());
    let mut step = 0usize;
    for &t in times {
        let target = (t / dt).round() as usize;
        while step < target {
            window.step(&kraus);
            step += 1;
        }
        let rho_s = window.reduced();
        let sys_exc = crate::sim::expectation(&number, &rho_s)?.re;
        total.push(sys_exc + window.window_photons() + window.emitted);
        traj.push_sample(t, 0, rho_s, &ops);
    }
    if window.rho.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("collision model"));
    }
    Ok(CollisionRun {
        trajectory: traj,
        total_excitation: total,
        refinement_change: None,
        warning: None,
    })
}

/// Runs at `cfg` and at half the bin width, and warns when the first
/// observable moves by more than `tolerance`. The refined run is skipped when
/// it does not fit the budget.
pub fn collision_model_checked(
    sys: &FeedbackSystem,
    rho0: &DensityMatrix,
    cfg: &CollisionConfig,
    times: &[f64],
    budget: &MemoryBudget,
    tolerance: f64,
) -> Result<CollisionRun> {
    let mut run = collision_model(sys, rho0, cfg, times, budget)?;
    match collision_model(sys, rho0, &cfg.refined(), times, budget) {
        Ok(fine) => {
            let (_, coarse_obs) = &run.trajectory.observables[0];
            let (_, fine_obs) = &fine.trajectory.observables[0];
            let change = coarse_obs.iter().zip(fine_obs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            run.refinement_change = Some(change);
            if change > tolerance {
                run.warning = Some(format!(
                    "collision model not converged: halving the bin width changes the output by {change:.3e} (> {tolerance:.1e})"
                ));
            }
        }
        Err(Error::OracleBudget { .. }) => {
            run.warning = Some("collision model convergence not checked: refined window exceeds the budget".into());
        }
        Err(e) => return Err(e),
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{two_level, TwoLevelParams};
    use crate::oracles::dde::dde_single_excitation;
    use crate::testutil::*;
    use std::f64::consts::PI;

    fn excited() -> DensityMatrix {
        DensityMatrix::basis(2, 1)
    }

    #[test]
    fn configuration_counts() {
        assert_eq!(count_configs(4, 3, 8), 81);
        assert_eq!(count_configs(63, 3, 2), 1 + 126 + 1953);
        assert_eq!(enumerate(4, 3, 8).len(), 81);
        assert_eq!(enumerate(5, 2, 1).len(), 6);
        assert_eq!(count_configs(64, 3, 128), 3u128.pow(64));
    }

    #[test]
    fn kraus_maps_are_trace_preserving() {
        let mut r = rng(1);
        let sys = FeedbackSystem::new(
            random_hermitian(&mut r, 2),
            random_operator(&mut r, 2),
            random_operator(&mut r, 2),
            1.0,
            0.7,
            1.1,
            1.0,
        )
        .unwrap();
        for strang in [false, true] {
            let cfg = CollisionConfig::new(4, 2).with_strang(strang);
            let k = kraus_sets(&sys, &cfg, 0.05, 8);
            let mut sum = Matrix::zeros(6, 6);
            for ko in &k[0] {
                sum += ko.adjoint() * ko;
            }
            assert!(crate::operator::max_abs(&(sum - Matrix::identity(6, 6))) < 1e-12);
        }
    }

    #[test]
    fn ground_state_stays_put() {
        let sys = two_level(&TwoLevelParams::default()).unwrap();
        let cfg = CollisionConfig::new(4, 1);
        let run = collision_model(&sys, &DensityMatrix::basis(2, 0), &cfg, &[0.5, 2.0], &MemoryBudget::default()).unwrap();
        for rho in &run.trajectory.states {
            assert!((rho[(0, 0)].re - 1.0).abs() < 1e-14);
        }
        assert!(run.total_excitation.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn no_return_gives_first_order_decay() {
        let sys = two_level(&TwoLevelParams::default()).unwrap().with_rates(1.0, 0.0).unwrap();
        let times = [0.5, 1.0, 2.0];
        let err = |n: usize| {
            let cfg = CollisionConfig::for_system(&sys, n);
            let run = collision_model(&sys, &excited(), &cfg, &times, &MemoryBudget::default()).unwrap();
            times
                .iter()
                .zip(run.trajectory.population(1))
                .map(|(t, p)| (p - (-t).exp()).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e1 < 0.05);
        let ratio = e1 / e2;
        assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn agrees_with_delay_equation_and_converges() {
        let sys = two_level(&TwoLevelParams { tau: 0.2, ..Default::default() }).unwrap();
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let exact = dde_single_excitation(1.0, 1.0, PI, 0.2, &times).unwrap();
        let err = |n: usize| {
            let cfg = CollisionConfig::for_system(&sys, n);
            let run = collision_model(&sys, &excited(), &cfg, &times, &MemoryBudget::default()).unwrap();
            run.trajectory
                .population(1)
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(8), err(16));
        assert!(e1 < 2e-2, "error {e1}");
        let ratio = e1 / e2;
        assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn one_photon_cap_is_exact_for_undriven_atom() {
        let sys = two_level(&TwoLevelParams { tau: 0.5, ..Default::default() }).unwrap();
        let times = [0.3, 0.9, 1.4];
        let capped = collision_model(&sys, &excited(), &CollisionConfig::for_system(&sys, 4), &times, &MemoryBudget::default())
            .unwrap();
        let dense = collision_model(&sys, &excited(), &CollisionConfig::new(4, 1), &times, &MemoryBudget::default()).unwrap();
        for (a, b) in capped.trajectory.states.iter().zip(&dense.trajectory.states) {
            assert!(crate::operator::max_abs(&(a - b)) < 1e-13);
        }
    }

    #[test]
    fn excitation_is_conserved_without_drive() {
        let sys = two_level(&TwoLevelParams { tau: 0.4, phi: 0.9, ..Default::default() }).unwrap();
        let times: Vec<f64> = (1..=24).map(|i| i as f64 * 0.05).collect();
        let run = collision_model(&sys, &excited(), &CollisionConfig::new(8, 1), &times, &MemoryBudget::default()).unwrap();
        for x in &run.total_excitation {
            assert!((x - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn driven_states_stay_physical() {
        let sys = two_level(&TwoLevelParams { drive: PI, ..Default::default() }).unwrap();
        let times: Vec<f64> = (1..=12).map(|i| i as f64 * 0.25).collect();
        let run = collision_model(&sys, &excited(), &CollisionConfig::new(4, 2), &times, &MemoryBudget::default()).unwrap();
        assert!(run.trajectory.max_trace_error() < 1e-8);
        assert!(run.trajectory.min_eigenvalue() > -1e-8);
        assert!(run.trajectory.max_hermiticity_error() < 1e-10);
    }

    #[test]
    fn oversized_windows_are_refused() {
        let sys = two_level(&TwoLevelParams { drive: PI, ..Default::default() }).unwrap();
        let cfg = CollisionConfig::new(64, 2);
        assert!(matches!(
            collision_model(&sys, &excited(), &cfg, &[1.0], &MemoryBudget::default()),
            Err(Error::OracleBudget { .. })
        ));
        assert!(collision_model(&sys, &excited(), &CollisionConfig::new(1, 2), &[1.0], &MemoryBudget::default()).is_err());
    }

    #[test]
    fn refinement_check_reports_change() {
        let sys = two_level(&TwoLevelParams { tau: 0.5, ..Default::default() }).unwrap();
        let cfg = CollisionConfig::for_system(&sys, 4);
        let run = collision_model_checked(&sys, &excited(), &cfg, &[0.5, 1.0], &MemoryBudget::default(), 1e-6).unwrap();
        assert!(run.refinement_change.unwrap() > 1e-6);
        assert!(run.warning.is_some());
        let loose = collision_model_checked(&sys, &excited(), &cfg, &[0.5, 1.0], &MemoryBudget::default(), 1.0).unwrap();
        assert!(loose.warning.is_none());
    }
}
