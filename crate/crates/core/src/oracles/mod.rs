//! Reference solvers that share no code path with the cascade engine.
//!
//! * [`dde`]: method-of-steps integration of linear delay equations, covering
//!   the single-excitation amplitude of an undriven atom and the mean field of
//!   a linear cavity.
//! * [`collision`]: a sliding window of time bins that interact with the
//!   system at both coupling points.

pub mod collision;
pub mod dde;

pub use collision::{collision_model, CollisionConfig, CollisionRun};
pub use dde::{dde_single_excitation, mean_field_cavity_dde, single_excitation_for, LinearDde};
