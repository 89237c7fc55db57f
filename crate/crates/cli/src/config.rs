//! Scenario configuration: flat TOML with dotted keys.
//!
//! ```toml
//! model.kind = "two_level"
//! model.drive = 3.141592653589793
//! model.tau = 1.0
//! run.t_max_tau = 5.0
//! run.n_samples = 201
//! run.engines = ["cascade", "no_feedback"]
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use delayloop::models::{cavity, two_level, CavityParams, TwoLevelParams};
use delayloop::oracles::CollisionConfig;
use delayloop::{DensityMatrix, FeedbackSystem, Integrator, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Cascade,
    Collision,
    Dde,
    NoFeedback,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Cascade => "cascade",
            Engine::Collision => "collision",
            Engine::Dde => "dde",
            Engine::NoFeedback => "no_feedback",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "cascade" => Engine::Cascade,
            "collision" => Engine::Collision,
            "dde" => Engine::Dde,
            "no_feedback" => Engine::NoFeedback,
            other => bail!("unknown engine `{other}` (expected cascade, collision, dde or no_feedback)"),
        })
    }
}

pub fn parse_engines(list: &str) -> Result<Vec<Engine>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevel {
        #[serde(default)]
        drive: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "pi")]
        phi: f64,
        #[serde(default = "one")]
        tau: f64,
    },
    Cavity {
        #[serde(default)]
        detuning: f64,
        #[serde(default = "four")]
        fock_cutoff: usize,
        #[serde(default = "one")]
        kappa1: f64,
        #[serde(default = "one")]
        kappa2: f64,
        #[serde(default = "pi")]
        phi: f64,
        #[serde(default = "half")]
        tau: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn pi() -> f64 {
    PI
}
fn four() -> usize {
    4
}

impl ModelConfig {
    pub fn tau(&self) -> f64 {
        match self {
            ModelConfig::TwoLevel { tau, .. } | ModelConfig::Cavity { tau, .. } => *tau,
        }
    }

    pub fn is_cavity(&self) -> bool {
        matches!(self, ModelConfig::Cavity { .. })
    }

    pub fn drive(&self) -> f64 {
        match self {
            ModelConfig::TwoLevel { drive, .. } => *drive,
            ModelConfig::Cavity { .. } => 0.0,
        }
    }

    pub fn system(&self) -> Result<FeedbackSystem> {
        let sys = match *self {
            ModelConfig::TwoLevel { drive, gamma, phi, tau } => two_level(&TwoLevelParams { drive, gamma, phi, tau }),
            ModelConfig::Cavity { detuning, fock_cutoff, kappa1, kappa2, phi, tau } => {
                cavity(&CavityParams { detuning, fock_cutoff, kappa1, kappa2, phi, tau })
            }
        };
        Ok(sys?)
    }

    /// Sets a sweepable parameter.
    pub fn set(&mut self, param: SweepParam, value: f64) -> Result<()> {
        match (self, param) {
            (ModelConfig::TwoLevel { tau, .. } | ModelConfig::Cavity { tau, .. }, SweepParam::Tau) => *tau = value,
            (ModelConfig::TwoLevel { phi, .. } | ModelConfig::Cavity { phi, .. }, SweepParam::Phi) => *phi = value,
            (ModelConfig::TwoLevel { drive, .. }, SweepParam::Drive) => *drive = value,
            (ModelConfig::Cavity { .. }, SweepParam::Drive) => bail!("the cavity model has no drive parameter"),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Tau,
    Drive,
    Phi,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Drive => "drive",
            SweepParam::Phi => "phi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Two-level excited state, or Fock state `|1>` for the cavity.
    #[default]
    Excited,
    Ground,
    Fock,
    Coherent,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub state: Option<InitialKind>,
    pub fock: Option<usize>,
    #[serde(default)]
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t_max: Option<f64>,
    /// Horizon in units of the delay; alternative to `t_max`.
    pub t_max_tau: Option<f64>,
    pub n_samples: usize,
    #[serde(default = "default_engines")]
    pub engines: Vec<Engine>,
    pub output: Option<String>,
    pub note: Option<String>,
}

fn default_engines() -> Vec<Engine> {
    vec![Engine::Cascade]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Exponential,
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub method: Method,
    pub tolerance: Option<f64>,
    pub max_step: Option<f64>,
}

impl IntegratorConfig {
    pub fn integrator(&self) -> Integrator {
        let base = match self.method {
            Method::Exponential => Integrator::default(),
            Method::Rk4 => Integrator::Rk4 { max_step: self.max_step },
        };
        match self.tolerance {
            Some(tol) => base.with_tolerance(tol),
            None => base,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    /// Bin width; rounded so that the delay holds a whole number of bins.
    pub dt: Option<f64>,
    pub bins_per_delay: Option<usize>,
    pub n_max: Option<usize>,
    pub photon_cap: Option<usize>,
    #[serde(default)]
    pub strang: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub collision: CollisionSection,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn t_max(&self) -> f64 {
        match (self.run.t_max, self.run.t_max_tau) {
            (Some(t), _) => t,
            (None, Some(m)) => m * self.model.tau(),
            (None, None) => f64::NAN,
        }
    }

    /// Uniform grid from 0 to `t_max`, both ends included.
    pub fn times(&self) -> Vec<f64> {
        let n = self.run.n_samples;
        let t_max = self.t_max();
        (0..n).map(|i| if i + 1 == n { t_max } else { t_max * i as f64 / (n - 1) as f64 }).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match (self.run.t_max, self.run.t_max_tau) {
            (Some(_), Some(_)) => bail!("set only one of run.t_max and run.t_max_tau"),
            (None, None) => bail!("run.t_max or run.t_max_tau is required"),
            _ => {}
        }
        let t_max = self.t_max();
        if !(t_max > 0.0) || !t_max.is_finite() {
            bail!("t_max must be positive and finite, got {t_max}");
        }
        if self.run.n_samples < 2 {
            bail!("run.n_samples must be at least 2, got {}", self.run.n_samples);
        }
        if self.run.engines.is_empty() {
            bail!("run.engines must not be empty");
        }
        self.model.system().context("invalid model parameters")?;
        self.initial_state().context("invalid initial state")?;
        for &e in &self.run.engines {
            self.check_engine(e)?;
        }
        if let Some(tol) = self.integrator.tolerance {
            if !(tol > 0.0) {
                bail!("integrator.tolerance must be positive, got {tol}");
            }
        }
        Ok(())
    }

    pub fn check_engine(&self, engine: Engine) -> Result<()> {
        match engine {
            Engine::Dde if self.model.is_cavity() => {
                if self.initial_kind() != InitialKind::Coherent {
                    bail!("the dde engine for the cavity model needs a coherent initial state");
                }
            }
            Engine::Dde => {
                if self.model.drive() != 0.0 {
                    bail!("the dde engine requires model.drive = 0");
                }
                if self.initial_kind() != InitialKind::Excited {
                    bail!("the dde engine for the two-level model needs the excited initial state");
                }
            }
            Engine::Collision => {
                self.collision_config()?;
            }
            Engine::Cascade | Engine::NoFeedback => {}
        }
        Ok(())
    }

    pub fn initial_kind(&self) -> InitialKind {
        match self.initial.state {
            Some(k) => k,
            None if self.model.is_cavity() => InitialKind::Coherent,
            None => InitialKind::Excited,
        }
    }

    pub fn alpha(&self) -> C64 {
        C64::new(self.initial.alpha_re, self.initial.alpha_im)
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        let d = self.model.system()?.local_dim();
        let level = |i: usize| {
            if i >= d {
                bail!("level {i} does not exist for local dimension {d}");
            }
            Ok(DensityMatrix::basis(d, i))
        };
        match self.initial_kind() {
            InitialKind::Excited => level(1),
            InitialKind::Ground => level(0),
            InitialKind::Fock => level(self.initial.fock.context("initial.fock is required for a Fock state")?),
            InitialKind::Coherent => {
                if !self.model.is_cavity() {
                    bail!("coherent initial states are only defined for the cavity model");
                }
                Ok(DensityMatrix::coherent(d - 1, self.alpha())?)
            }
        }
    }

    pub fn collision_config(&self) -> Result<CollisionConfig> {
        let tau = self.model.tau();
        let c = &self.collision;
        let bins = match (c.bins_per_delay, c.dt) {
            (Some(_), Some(_)) => bail!("set only one of collision.dt and collision.bins_per_delay"),
            (Some(n), None) => n,
            (None, Some(dt)) if dt > 0.0 => (tau / dt).round() as usize,
            (None, Some(dt)) => bail!("collision.dt must be positive, got {dt}"),
            (None, None) => 4,
        };
        if bins < 2 {
            bail!("the collision model needs at least 2 bins per delay, got {bins}");
        }
        let sys = self.model.system()?;
        let mut cfg = CollisionConfig::for_system(&sys, bins);
        if let Some(n) = c.n_max {
            cfg = CollisionConfig::new(bins, n).with_photon_cap(c.photon_cap);
        } else if c.photon_cap.is_some() {
            cfg = cfg.with_photon_cap(c.photon_cap);
        }
        Ok(cfg.with_strang(c.strang))
    }
}
