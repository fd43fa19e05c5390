//! Two-level GEM dynamics on a 1-D grid.
//!
//! The coherence obeys `dσ/dt = -(γ + iδ(z,t))σ + i g E` and the probe envelope
//! `dE/dz = i κ σ`, with light transit neglected (quasi-static field). Each
//! time step applies an exact exponential rotation/decay to σ, an
//! exponential-time-differencing source term, and a trapezoidal spatial
//! integration of the field. σ is driven by a locally averaged field so the
//! discrete energy balance closes exactly in z.

mod ensemble;
mod field;
mod grid;
mod kernel;
mod run;
mod schedule;

pub use ensemble::{effective_two_level, EnsembleParams, LambdaParams, LambdaReduction};
pub use field::{drive_field_into, propagate_field, propagate_field_into};
pub use grid::SimulationGrid;
pub use kernel::{expm1_complex, step_coherence, EtdCoefficients};
pub use run::{excitation_balance, run_scenario, RunOptions, Simulation, SimulationRecord, Snapshot};
pub use schedule::{DetuningSchedule, DetuningSegment};
