use serde::{Deserialize, Serialize};

use crate::dynamics::{DetuningSchedule, DetuningSegment};
use crate::error::{GemError, Result};

/// What a region event does to the detuning profile inside its z-range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionAction {
    /// `δ → −δ` pointwise.
    FlipSign,
    /// `δ → 0`.
    SetZero,
    /// `δ = offset + slope (z − z_mid)` with `z_mid` the region centre;
    /// `slope` is in MHz per memory length.
    SetLinear { slope: f64, offset: f64 },
}

/// Change of the gradient in `[z_lo, z_hi)` at `time` (the upper edge is
/// closed when `z_hi = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionFlipEvent {
    pub time: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub action: RegionAction,
}

impl RegionFlipEvent {
    pub fn new(time: f64, z_lo: f64, z_hi: f64, action: RegionAction) -> Self {
        RegionFlipEvent {
            time,
            z_lo,
            z_hi,
            action,
        }
    }

    pub fn global(time: f64, action: RegionAction) -> Self {
        Self::new(time, 0.0, 1.0, action)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0 <= self.z_lo && self.z_lo < self.z_hi && self.z_hi <= 1.0) {
            return Err(GemError::Validation(format!(
                "event at t={}: z range ({}, {}) must satisfy 0 <= z_lo < z_hi <= 1",
                self.time, self.z_lo, self.z_hi
            )));
        }
        if !self.time.is_finite() {
            return Err(GemError::Validation("event time must be finite".into()));
        }
        if let RegionAction::SetLinear { slope, offset } = self.action {
            if !(slope.is_finite() && offset.is_finite()) {
                return Err(GemError::Validation(format!("event at t={}: non-finite set-linear", self.time)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.z_lo && (z < self.z_hi || (self.z_hi >= 1.0 && z <= 1.0))
    }

    pub fn apply(&self, profile: &mut [f64], z: &[f64]) {
        let mid = 0.5 * (self.z_lo + self.z_hi);
        for (d, &zj) in profile.iter_mut().zip(z) {
            if !self.contains(zj) {
                continue;
            }
            *d = match self.action {
                RegionAction::FlipSign => -*d,
                RegionAction::SetZero => 0.0,
                RegionAction::SetLinear { slope, offset } => offset + slope * (zj - mid),
            };
        }
    }
}

/// Build a schedule from an initial profile and a list of region events.
///
/// Events sharing a time are applied together, in list order, and open one
/// new segment. Events at `t <= 0` modify the initial profile.
pub fn schedule_from_events(
    initial: Vec<f64>,
    events: &[RegionFlipEvent],
    t_total: f64,
    z: &[f64],
) -> Result<DetuningSchedule> {
    if initial.len() != z.len() {
        return Err(GemError::Validation("initial profile does not match the grid".into()));
    }
    let mut sorted: Vec<&RegionFlipEvent> = events.iter().collect();
    for e in &sorted {
        e.check()?;
        if e.time >= t_total {
            return Err(GemError::Validation(format!(
                "event at t={} is not before the end of the run ({t_total})",
                e.time
            )));
        }
    }
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    let mut profile = initial;
    let mut segments = Vec::new();
    let mut start = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let t = sorted[k].time.max(0.0);
        if t > start {
            segments.push(DetuningSegment::new(start, t, profile.clone()));
            start = t;
        }
        while k < sorted.len() && sorted[k].time.max(0.0) == t {
            sorted[k].apply(&mut profile, z);
            k += 1;
        }
    }
    segments.push(DetuningSegment::new(start, t_total, profile));
    Ok(DetuningSchedule::new(segments))
}
