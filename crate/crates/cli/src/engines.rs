//! Runs one engine over the configured time grid and flattens the result
//! into CSV rows.

use anyhow::{Context, Result};
use delayloop::oracles::{collision_model, dde_single_excitation, mean_field_cavity_dde};
use delayloop::sim::no_feedback_with;
use delayloop::{Error, MemoryBudget, Simulation, Trajectory};
use serde::Serialize;

use crate::config::{Engine, ModelConfig, ScenarioConfig};

/// `t`, three model columns, `trace_err`, `min_eig`.
pub type Row = [f64; 6];

pub const TWO_LEVEL_COLUMNS: [&str; 3] = ["P_e", "re_coh", "im_coh"];
pub const CAVITY_COLUMNS: [&str; 3] = ["re_a", "im_a", "n_phot"];

pub fn model_columns(cfg: &ScenarioConfig) -> [&'static str; 3] {
    if cfg.model.is_cavity() {
        CAVITY_COLUMNS
    } else {
        TWO_LEVEL_COLUMNS
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Truncation {
    pub reachable_t: f64,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct EngineRun {
    pub engine: Engine,
    #[serde(skip)]
    pub rows: Vec<Row>,
    pub samples: usize,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    /// Largest cascade size used; absent for engines without copies.
    pub max_copies: Option<usize>,
    pub truncated: Option<Truncation>,
    pub details: Vec<String>,
}

impl EngineRun {
    fn new(engine: Engine, rows: Vec<Row>, max_copies: Option<usize>) -> Self {
        let max_trace_error = rows.iter().map(|r| r[4]).fold(0.0, f64::max);
        let min_eigenvalue = rows.iter().map(|r| r[5]).fold(f64::INFINITY, f64::min);
        Self {
            engine,
            samples: rows.len(),
            rows,
            max_trace_error,
            min_eigenvalue,
            max_copies,
            truncated: None,
            details: Vec::new(),
        }
    }

    pub fn empty(engine: Engine) -> Self {
        Self::new(engine, Vec::new(), None)
    }

    /// Row indices whose state diagnostics fall outside the accepted bounds.
    pub fn invariant_violations(&self) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| !(self.rows[i][4].abs() < 1e-8 && self.rows[i][5] > -1e-8))
            .collect()
    }
}

/// Failure of an engine. Budget errors carry what was computed before the
/// ceiling was hit.
pub enum EngineError {
    Budget { partial: Option<Box<EngineRun>>, error: Error },
    Other(anyhow::Error),
}

impl From<anyhow::Error> for EngineError {
    fn from(e: anyhow::Error) -> Self {
        EngineError::Other(e)
    }
}

fn rows_from(traj: &Trajectory, cavity: bool) -> Result<Vec<Row>> {
    let (first, second) = if cavity { ("a", "n") } else { ("sigma_minus", "P_e") };
    let x = traj.observable(first).context("missing observable")?;
    let y = traj.observable(second).context("missing observable")?;
    Ok((0..traj.len())
        .map(|i| {
            let diag = &traj.diagnostics[i];
            let middle = if cavity {
                [x[i].re, x[i].im, y[i].re]
            } else {
                [y[i].re, x[i].re, x[i].im]
            };
            [traj.times[i], middle[0], middle[1], middle[2], diag.trace_error, diag.min_eigenvalue]
        })
        .collect())
}

pub fn run_engine(cfg: &ScenarioConfig, engine: Engine, budget: &MemoryBudget) -> Result<EngineRun, EngineError> {
    cfg.check_engine(engine)?;
    let sys = cfg.model.system()?;
    let rho0 = cfg.initial_state()?;
    let times = cfg.times();
    let cavity = cfg.model.is_cavity();
    let integrator = cfg.integrator.integrator();
    match engine {
        Engine::Cascade => {
            let sim = Simulation::new(sys).with_integrator(integrator).with_budget(*budget);
            let (traj, err) = sim.run_partial(&rho0, &times);
            let mut run = EngineRun::new(engine, rows_from(&traj, cavity)?, Some(traj.max_copies()));
            match err {
                None => Ok(run),
                Some(error @ Error::BudgetExceeded { max_reachable_t, .. }) => {
                    run.truncated = Some(Truncation { reachable_t: max_reachable_t, message: error.to_string() });
                    Err(EngineError::Budget { partial: Some(Box::new(run)), error })
                }
                Some(e) => Err(EngineError::Other(e.into())),
            }
        }
        Engine::NoFeedback => {
            let traj = no_feedback_with(&sys, &rho0, &times, integrator).map_err(anyhow::Error::from)?;
            let mut run = EngineRun::new(engine, rows_from(&traj, cavity)?, None);
            run.details.push(format!(
                "single system with total decay rate kappa1 + kappa2 = {}",
                sys.kappa1() + sys.kappa2()
            ));
            Ok(run)
        }
        Engine::Collision => {
            let cc = cfg.collision_config()?;
            let result = collision_model(&sys, &rho0, &cc, &times, budget);
            let out = match result {
                Ok(out) => out,
                Err(error @ Error::OracleBudget { .. }) => return Err(EngineError::Budget { partial: None, error }),
                Err(e) => return Err(EngineError::Other(e.into())),
            };
            let mut run = EngineRun::new(engine, rows_from(&out.trajectory, cavity)?, None);
            let dt = sys.tau() / cc.bins_per_delay as f64;
            let offset = times.iter().map(|t| (t - (t / dt).round() * dt).abs()).fold(0.0, f64::max);
            run.details.push(format!(
                "{} bins per delay (dt = {dt}), {} photons per bin, photon cap {:?}, strang {}",
                cc.bins_per_delay, cc.max_bin_photons, cc.photon_cap, cc.strang
            ));
            run.details.push(format!("samples taken at the nearest bin boundary, max offset {offset:.3e}"));
            Ok(run)
        }
        Engine::Dde => {
            let rows: Vec<Row> = match cfg.model {
                ModelConfig::Cavity { detuning, kappa1, kappa2, phi, tau, .. } => {
                    // the scenario phase follows the cascade convention
                    let a = mean_field_cavity_dde(detuning, kappa1, kappa2, -phi, tau, cfg.alpha(), &times)
                        .map_err(anyhow::Error::from)?;
                    times.iter().zip(a).map(|(&t, a)| [t, a.re, a.im, a.norm_sqr(), 0.0, 0.0]).collect()
                }
                ModelConfig::TwoLevel { gamma, phi, tau, .. } => {
                    let p = dde_single_excitation(gamma, gamma, phi, tau, &times).map_err(anyhow::Error::from)?;
                    times.iter().zip(p).map(|(&t, p)| [t, p, 0.0, 0.0, 0.0, p.min(1.0 - p)]).collect()
                }
            };
            let mut run = EngineRun::new(engine, rows, None);
            run.details.push(if cavity {
                "mean-field amplitude with the delayed term at phase -phi; n_phot = |<a>|^2 of the coherent state".into()
            } else {
                "single-excitation amplitude; state diag(1 - P_e, P_e)".into()
            });
            Ok(run)
        }
    }
}
