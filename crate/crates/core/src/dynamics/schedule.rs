use serde::{Deserialize, Serialize};

use crate::error::{GemError, Result};

/// A two-photon detuning profile δ(z) (MHz) held over `[t_start, t_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub profile: Vec<f64>,
    /// Rotating-frame frequency (MHz) the integrator uses over this segment.
    /// Physics does not depend on it; the step error is smallest when it is
    /// near the frequency the medium emits.
    #[serde(default)]
    pub frame_mhz: f64,
}

impl DetuningSegment {
    pub fn new(t_start: f64, t_end: f64, profile: Vec<f64>) -> Self {
        DetuningSegment {
            t_start,
            t_end,
            profile,
            frame_mhz: 0.0,
        }
    }

    pub fn with_frame(mut self, frame_mhz: f64) -> Self {
        self.frame_mhz = frame_mhz;
        self
    }

    /// Linear profile `offset + slope (z - 1/2)` on `n_z` points of the
    /// normalised axis.
    pub fn linear(t_start: f64, t_end: f64, n_z: usize, slope: f64, offset: f64) -> Self {
        let profile = (0..n_z)
            .map(|j| offset + slope * (j as f64 / (n_z - 1) as f64 - 0.5))
            .collect();
        Self::new(t_start, t_end, profile)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    /// Least-squares slope of δ against normalised position (MHz per memory length).
    pub fn slope_eta(&self) -> f64 {
        let n = self.profile.len();
        if n < 2 {
            return 0.0;
        }
        let zs: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
        let zm = zs.iter().sum::<f64>() / n as f64;
        let dm = self.profile.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (z, d) in zs.iter().zip(&self.profile) {
            sxy += (z - zm) * (d - dm);
            sxx += (z - zm) * (z - zm);
        }
        sxy / sxx
    }

    /// δ at the memory centre, linearly interpolated.
    pub fn offset_delta_os(&self) -> f64 {
        let n = self.profile.len();
        if n == 0 {
            return 0.0;
        }
        let x = 0.5 * (n - 1) as f64;
        let lo = x.floor() as usize;
        let hi = x.ceil() as usize;
        let frac = x - lo as f64;
        self.profile[lo] * (1.0 - frac) + self.profile[hi] * frac
    }

    /// Span of detunings covered by the profile, `max - min`.
    pub fn bandwidth(&self) -> f64 {
        let (lo, hi) = self.range();
        hi - lo
    }

    pub fn range(&self) -> (f64, f64) {
        self.profile
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
                (lo.min(d), hi.max(d))
            })
    }
}

/// Piecewise-in-time sequence of detuning profiles plus the windows during
/// which the coupling field (and hence its extra scattering) is on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetuningSchedule {
    pub segments: Vec<DetuningSegment>,
    pub coupling_on: Vec<(f64, f64)>,
}

impl DetuningSchedule {
    pub fn new(segments: Vec<DetuningSegment>) -> Self {
        DetuningSchedule {
            segments,
            coupling_on: Vec::new(),
        }
    }

    pub fn with_coupling(mut self, windows: Vec<(f64, f64)>) -> Self {
        self.coupling_on = windows;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Checks that the segments tile `[0, t_total]` and all profiles have `n_z` finite entries.
    /// An empty schedule is valid (the medium is then inert).
    pub fn validate(&self, t_total: f64, n_z: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Ok(());
        }
        let tol = |t: f64| 1e-9 * t.abs().max(1.0);
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.t_start < seg.t_end) {
                return Err(GemError::Validation(format!(
                    "segment {i}: t_start {} must precede t_end {}",
                    seg.t_start, seg.t_end
                )));
            }
            if seg.profile.len() != n_z {
                return Err(GemError::Validation(format!(
                    "segment {i}: profile has {} points, grid has {n_z}",
                    seg.profile.len()
                )));
            }
            if seg.profile.iter().any(|d| !d.is_finite()) || !seg.frame_mhz.is_finite() {
                return Err(GemError::Validation(format!(
                    "segment {i}: non-finite detuning"
                )));
            }
            if let Some(next) = self.segments.get(i + 1) {
                if (next.t_start - seg.t_end).abs() > tol(seg.t_end) {
                    return Err(GemError::Validation(format!(
                        "segments {i} and {} are not contiguous ({} vs {})",
                        i + 1,
                        seg.t_end,
                        next.t_start
                    )));
                }
            }
        }
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        if first.t_start > tol(0.0) {
            return Err(GemError::Validation(format!(
                "schedule starts at {} instead of 0",
                first.t_start
            )));
        }
        if last.t_end < t_total - tol(t_total) {
            return Err(GemError::Validation(format!(
                "schedule ends at {} before the run ends at {t_total}",
                last.t_end
            )));
        }
        for &(a, b) in &self.coupling_on {
            if !(a <= b) || a < -tol(0.0) || b > t_total + tol(t_total) {
                return Err(GemError::Validation(format!(
                    "coupling window ({a}, {b}) outside [0, {t_total}]"
                )));
            }
        }
        Ok(())
    }

    /// Index of the segment active at `t`; times past the end map to the last segment.
    pub fn segment_index_at(&self, t: f64) -> Option<usize> {
        if self.segments.is_empty() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.t_end <= t);
        Some(idx.min(self.segments.len() - 1))
    }

    pub fn segment_at(&self, t: f64) -> Option<&DetuningSegment> {
        self.segment_index_at(t).map(|i| &self.segments[i])
    }

    pub fn coupling_at(&self, t: f64) -> bool {
        self.coupling_on.iter().any(|&(a, b)| t >= a && t < b)
    }

    /// Start times of every segment after the first: the switching events.
    pub fn switch_times(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.t_start).collect()
    }
}
