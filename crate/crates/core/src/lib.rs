//! Exact reduced dynamics of a quantum system in a coherent feedback loop with
//! a finite delay.
//!
//! The delayed problem at time `t` is mapped onto a cascade of
//! `k = floor(t / tau) + 1` fictitious copies of the system. A propagator for
//! the cascade is integrated over one delay interval and then contracted with a
//! generalized partial trace that wires the output of each copy into the input
//! of the next.
//!
//! Module map:
//!
//! * [`operator`] / [`superop`]: dense operators, Kronecker embedding, sparse
//!   Liouville-space superoperators (column-stacking convention).
//! * [`cascade`]: the feedback model and the piecewise-constant cascade generator.
//! * [`propagator`]: flows of constant generators (RK4 and exponential) and the
//!   full k-copy propagator.
//! * [`gtrace`]: legged maps, the generalized trace and the chain contraction.
//! * [`sim`]: time-grid orchestration, observables and the no-feedback reference.
//! * [`oracles`]: delay-ODE and time-bin collision-model reference solvers.
//! * [`models`]: the driven two-level atom and the truncated cavity.

pub mod budget;
pub mod cascade;
pub mod error;
pub mod gtrace;
pub mod models;
pub mod operator;
pub mod oracles;
pub mod propagator;
pub mod sim;
pub mod state;
pub mod superop;

#[cfg(test)]
pub(crate) mod testutil;

pub use budget::MemoryBudget;
pub use cascade::{build_generator, copies_for_time, FeedbackSystem, PiecewiseGenerator};
pub use error::{Error, Result};
pub use gtrace::{contract_chain, gen_trace, ContractionOrder, LeggedMap};
pub use operator::{embed, kron, Operator};
pub use propagator::{evolve_propagator, flow, flow_apply, Integrator, PropagatorMatrix};
pub use sim::{expectation, no_feedback_reference, simulate, Simulation, Trajectory};
pub use state::DensityMatrix;
pub use superop::{dissipator_super, ham_super, lmult, rmult, SparseMatrix, SuperOperator};

pub use num_complex::Complex64 as C64;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dense complex matrix, column-major.
pub type Matrix = nalgebra::DMatrix<C64>;
