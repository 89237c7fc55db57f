//! Ready-made feedback systems: the resonantly driven two-level atom and the
//! truncated linear cavity. Rates are in units of `gamma`.

use std::f64::consts::PI;

use crate::cascade::FeedbackSystem;
use crate::error::{Error, Result};
use crate::operator::{annihilation, sigma_minus, sigma_plus, Operator};
use crate::C64;

/// Two-level atom with `H_S = drive (sigma_+ + sigma_-)` in the frame of a
/// resonant drive and `a1 = a2 = sigma_-`, `kappa1 = kappa2 = gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelParams {
    pub drive: f64,
    pub gamma: f64,
    pub phi: f64,
    pub tau: f64,
}

impl Default for TwoLevelParams {
    fn default() -> Self {
        Self {
            drive: 0.0,
            gamma: 1.0,
            phi: PI,
            tau: 1.0,
        }
    }
}

pub fn two_level(p: &TwoLevelParams) -> Result<FeedbackSystem> {
    if !(p.drive >= 0.0 && p.drive.is_finite()) {
        return Err(Error::InvalidParameter(format!("drive must be finite and >= 0, got {}", p.drive)));
    }
    let h = (&sigma_plus() + &sigma_minus()).scale(C64::new(p.drive, 0.0));
    FeedbackSystem::new(h, sigma_minus(), sigma_minus(), p.gamma, p.gamma, p.phi, p.tau)
}

/// Linear cavity `H_S = detuning a^dagger a` on Fock levels `0..=fock_cutoff`,
/// with `a1 = a2 = a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityParams {
    pub detuning: f64,
    pub fock_cutoff: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub phi: f64,
    pub tau: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            detuning: 0.0,
            fock_cutoff: 4,
            kappa1: 1.0,
            kappa2: 1.0,
            phi: PI,
            tau: 0.5,
        }
    }
}

pub fn cavity(p: &CavityParams) -> Result<FeedbackSystem> {
    if p.fock_cutoff == 0 {
        return Err(Error::InvalidParameter("Fock cutoff must be at least 1".into()));
    }
    let a = annihilation(p.fock_cutoff);
    let h: Operator = (&a.dagger() * &a).scale(C64::new(p.detuning, 0.0));
    FeedbackSystem::new(h, a.clone(), a, p.kappa1, p.kappa2, p.phi, p.tau)
}

/// The three parameter sets of the reference figure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Panel {
    /// Undriven, `gamma tau = 1`.
    A,
    /// `drive = pi gamma`, `tau` one Rabi period (`gamma tau = 1`).
    B,
    /// `drive = 10 pi gamma`, `tau` one Rabi period (`gamma tau = 0.1`).
    C,
}

/// Delay equal to the Rabi period `2 pi / (2 drive)`.
pub fn rabi_period(drive: f64) -> f64 {
    PI / drive
}

impl Panel {
    pub fn params(self) -> TwoLevelParams {
        let drive = match self {
            Panel::A => 0.0,
            Panel::B => PI,
            Panel::C => 10.0 * PI,
        };
        let tau = if drive > 0.0 { rabi_period(drive) } else { 1.0 };
        TwoLevelParams {
            drive,
            tau,
            ..TwoLevelParams::default()
        }
    }

    pub fn system(self) -> FeedbackSystem {
        two_level(&self.params()).expect("panel parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::max_abs;

    #[test]
    fn panel_parameters() {
        let a = Panel::A.params();
        assert_eq!((a.drive, a.tau, a.phi), (0.0, 1.0, PI));
        let b = Panel::B.params();
        assert!((b.tau - 1.0).abs() < 1e-15);
        let c = Panel::C.params();
        assert!((c.drive - 10.0 * PI).abs() < 1e-12);
        assert!((c.tau - 0.1).abs() < 1e-15);
        assert!(Panel::A.system().is_undriven());
    }

    #[test]
    fn two_level_is_valid_for_any_drive() {
        for drive in [0.0, 0.5, PI, 100.0] {
            let sys = two_level(&TwoLevelParams { drive, ..Default::default() }).unwrap();
            assert!(sys.h_s().is_hermitian());
            assert_eq!((sys.kappa1(), sys.kappa2()), (1.0, 1.0));
        }
        assert!(two_level(&TwoLevelParams { drive: -1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn cutoff_one_cavity_is_a_two_level_system() {
        let sys = cavity(&CavityParams { fock_cutoff: 1, ..Default::default() }).unwrap();
        assert_eq!(sys.a1(), &sigma_minus());
        assert_eq!(sys.local_dim(), 2);
    }

    #[test]
    fn cavity_operators() {
        let sys = cavity(&CavityParams { detuning: 0.3, ..Default::default() }).unwrap();
        assert_eq!(sys.local_dim(), 5);
        let a = sys.a1();
        let comm = a.commutator(&a.dagger());
        for n in 0..4 {
            assert!((comm.matrix()[(n, n)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let n_op = &a.dagger() * a;
        assert!(max_abs((sys.h_s() - &n_op.scale(C64::new(0.3, 0.0))).matrix()) < 1e-15);
        assert!(cavity(&CavityParams { fock_cutoff: 0, ..Default::default() }).is_err());
    }
}
