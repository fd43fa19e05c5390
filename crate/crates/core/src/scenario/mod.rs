//! Input pulses, region events and the protocol presets, bundled into
//! runnable [`Scenario`]s.

mod events;
mod presets;
mod pulse;
mod validate;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use events::{schedule_from_events, RegionAction, RegionFlipEvent};
pub use presets::{preset_scenario, PresetKind, PresetParams};
pub use pulse::{synthesize_pulse, PulseSpec, Sideband, MIN_SAMPLES_PER_FWHM};
pub use validate::{validate_scenario, Diagnostic, Severity};

use crate::detection::DetectionConfig;
use crate::dynamics::{
    DetuningSchedule, EnsembleParams, RunOptions, Simulation, SimulationGrid, SimulationRecord,
};
use crate::error::{GemError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowRole {
    Input,
    Echo,
}

/// A time window where a pulse is expected, used by the analysis chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisWindow {
    pub label: String,
    pub role: WindowRole,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Expected peak time, if known.
    #[serde(default)]
    pub center: Option<f64>,
    /// Expected carrier in the rotating frame (MHz), if known.
    #[serde(default)]
    pub freq: Option<f64>,
}

impl AnalysisWindow {
    pub fn new(label: &str, role: WindowRole, center: f64, half_width: f64, freq: f64) -> Self {
        AnalysisWindow {
            label: label.to_string(),
            role,
            t_lo: center - half_width,
            t_hi: center + half_width,
            center: Some(center),
            freq: Some(freq),
        }
    }
}

/// Protocol tag, the parameters it was built from and what the analysis should look for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub protocol: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub windows: Vec<AnalysisWindow>,
    /// Intended storage region `(z_lo, z_hi)` of each pulse.
    #[serde(default)]
    pub pulse_regions: Vec<(f64, f64)>,
    #[serde(default)]
    pub events: Vec<RegionFlipEvent>,
    #[serde(default)]
    pub expected: BTreeMap<String, f64>,
}

/// A complete experiment: medium, gradient program, inputs and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: SimulationGrid,
    pub ensemble: EnsembleParams,
    pub pulses: Vec<PulseSpec>,
    pub schedule: DetuningSchedule,
    pub detection: DetectionConfig,
    pub meta: ScenarioMeta,
}

impl Scenario {
    /// Sum of all pulses sampled on the grid times.
    pub fn input_series(&self) -> Result<Vec<Complex64>> {
        let t = self.grid.times();
        let mut total = vec![Complex64::new(0.0, 0.0); t.len()];
        for p in &self.pulses {
            for (acc, v) in total.iter_mut().zip(synthesize_pulse(p, &t)?) {
                *acc += v;
            }
        }
        Ok(total)
    }

    pub fn run(&self, opts: &RunOptions) -> Result<SimulationRecord> {
        let input = self.input_series()?;
        Simulation::new(&self.grid, &self.ensemble, &self.schedule).run(&input, opts)
    }

    /// Copy with pulse `index` removed; everything else, metadata included, unchanged.
    pub fn without_pulse(&self, index: usize) -> Result<Scenario> {
        if index >= self.pulses.len() {
            return Err(GemError::InvalidParameter(format!(
                "pulse index {index} out of range ({} pulses)",
                self.pulses.len()
            )));
        }
        let mut s = self.clone();
        s.pulses.remove(index);
        Ok(s)
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        validate_scenario(self)
    }

    pub fn window(&self, label: &str) -> Option<&AnalysisWindow> {
        self.meta.windows.iter().find(|w| w.label == label)
    }
}
