//! Simulation of a quantum-annealing pointer that performs a collective
//! projection measurement on `|φ⟩^⊗N` versus `|ψ⟩^⊗N`.
//!
//! The measurement Hamiltonian couples the pointer to one qubit at a time
//! through step-function windows while a transverse driver is annealed away.
//! [`engine`] simulates this exactly in `O(N)` time by composing per-window
//! 4×4 unitaries; [`dense`] integrates the full joint state for small `N` and
//! serves as the reference; [`two_level`] holds the effective single-pointer
//! annealing dynamics that the engine converges to at large `N`.

pub mod dense;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod model;
pub mod propagator;
pub mod two_level;

pub use engine::{run, run_at_times, RunResult, SegmentPropagator, TransferOperator};
pub use error::{Error, Result};
pub use experiments::{EngineKind, NGrid, Quantity, ThresholdQuery, TrajectoryRow};
pub use model::{
    coupling_at, make_state, overlap_collective, scaling_lambda, Case, CouplingSchedule,
    PointerDensity, QubitPureState, SimParams, StateKind,
};
pub use propagator::{IntegratorConfig, Method};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
