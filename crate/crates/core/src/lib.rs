//! Gradient echo memory (GEM) simulator.
//!
//! The crate integrates the weak-probe two-level GEM equations on a 1-D grid,
//! maps solenoid-array currents to two-photon detuning profiles, builds the
//! standard spectral-manipulation protocols as [`Scenario`]s, and reproduces
//! the heterodyne measurement chain used to characterise echoes.
//!
//! Units throughout: time in µs, frequency in MHz (cyclic), magnetic field in
//! Gauss, current in Amperes, position normalised to the memory length.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coils;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod scenario;
pub mod units;

pub use analysis::{analyze, RunAnalysis};
pub use coils::{CoilArray, CurrentProgram, CurrentWindow, SolenoidElement};
pub use detection::{DetectionConfig, FitResult, FringeSeries};
pub use dynamics::{
    DetuningSchedule, DetuningSegment, EnsembleParams, LambdaParams, SimulationGrid,
    SimulationRecord,
};
pub use error::{GemError, Result};
pub use scenario::{PresetKind, PresetParams, PulseSpec, RegionAction, RegionFlipEvent, Scenario};

pub use num_complex::Complex64;
