use serde::{Deserialize, Serialize};

use super::pulse::MIN_SAMPLES_PER_FWHM;
use super::Scenario;
use crate::detection::DetectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &str, message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.into(),
            message,
        }
    }

    fn warning(code: &str, message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code: code.into(),
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Memory-to-pulse bandwidth ratio below which a warning is raised.
const BANDWIDTH_MARGIN: f64 = 2.0;
/// Fraction of the Nyquist frequency the signal may occupy before a warning.
const NYQUIST_MARGIN: f64 = 0.5;
/// Sample-rate multiple of the highest beat frequency required by the detector.
const DETECTION_OVERSAMPLING: f64 = 8.0;

fn in_region(z: f64, (lo, hi): (f64, f64)) -> bool {
    z >= lo && (z < hi || (hi >= 1.0 && z <= 1.0))
}

/// Check a scenario for problems that would make a run meaningless or
/// misleading. Never fails; an empty list means no findings.
pub fn validate_scenario(s: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let grid = &s.grid;
    if let Err(e) = grid.check() {
        out.push(Diagnostic::error("grid", e.to_string()));
        return out;
    }
    if let Err(e) = s.ensemble.check() {
        out.push(Diagnostic::error("ensemble", e.to_string()));
    }
    if let Err(e) = s.detection.check() {
        out.push(Diagnostic::error("detection", e.to_string()));
    }
    let t_total = grid.duration();
    if let Err(e) = s.schedule.validate(t_total, grid.n_z) {
        out.push(Diagnostic::error("schedule", e.to_string()));
        return out;
    }
    let dt = grid.dt;
    let z = grid.z_normalized();
    let nyquist = 0.5 / dt;
    let mut max_freq: f64 = 0.0;
    let mut max_fwhm: f64 = 0.0;

    for (i, p) in s.pulses.iter().enumerate() {
        if let Err(e) = p.check() {
            out.push(Diagnostic::error("pulse", format!("pulse {i}: {e}")));
            continue;
        }
        max_fwhm = max_fwhm.max(p.fwhm);
        if p.fwhm < MIN_SAMPLES_PER_FWHM * dt * (1.0 - 1e-9) {
            out.push(Diagnostic::error(
                "resolution",
                format!(
                    "pulse {i}: fwhm {} µs spans fewer than {MIN_SAMPLES_PER_FWHM} steps of {dt} µs",
                    p.fwhm
                ),
            ));
        }
        if p.peak_time - 2.0 * p.fwhm < 0.0 || p.peak_time + 2.0 * p.fwhm > t_total {
            out.push(Diagnostic::error(
                "pulse-window",
                format!("pulse {i}: peak at {} µs is not inside the run with a 2 FWHM margin", p.peak_time),
            ));
        }
        let bp = p.bandwidth();
        let components = p.components();
        for (nu, _) in &components {
            max_freq = max_freq.max(nu.abs() + 3.0 * bp);
        }

        let Some(seg) = s.schedule.segment_at(p.peak_time) else {
            continue;
        };
        let region = s.meta.pulse_regions.get(i).copied().unwrap_or((0.0, 1.0));
        let vals: Vec<f64> = z
            .iter()
            .zip(&seg.profile)
            .filter(|(x, _)| in_region(**x, region))
            .map(|(_, d)| *d)
            .collect();
        if vals.is_empty() {
            continue;
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (nu, _) in &components {
            let res = -nu;
            if res - 0.5 * bp < lo || res + 0.5 * bp > hi {
                out.push(Diagnostic::error(
                    "bandwidth",
                    format!(
                        "pulse {i}: component at {nu:+.3} MHz needs detunings {:.3}..{:.3} MHz but region ({}, {}) spans {lo:.3}..{hi:.3} MHz at arrival",
                        res - 0.5 * bp,
                        res + 0.5 * bp,
                        region.0,
                        region.1
                    ),
                ));
            }
        }
        let ratio = (hi - lo) / bp;
        if ratio < BANDWIDTH_MARGIN * components.len() as f64 {
            out.push(Diagnostic::warning(
                "bandwidth-margin",
                format!(
                    "pulse {i}: memory/pulse bandwidth ratio {:.2} per component is below {BANDWIDTH_MARGIN}",
                    ratio / components.len() as f64
                ),
            ));
        }
        // content resonant outside the intended region at arrival
        for (nu, _) in &components {
            let stray = z.iter().zip(&seg.profile).any(|(x, d)| {
                !in_region(*x, region) && (d + nu).abs() < 0.5 * bp
            });
            if stray {
                out.push(Diagnostic::warning(
                    "wrong-region",
                    format!(
                        "pulse {i}: component at {nu:+.3} MHz is also resonant outside region ({}, {})",
                        region.0, region.1
                    ),
                ));
            }
        }
    }

    if max_freq > nyquist {
        out.push(Diagnostic::error(
            "nyquist",
            format!("signal content up to {max_freq:.3} MHz exceeds the grid Nyquist frequency {nyquist:.3} MHz"),
        ));
    } else if max_freq > NYQUIST_MARGIN * nyquist {
        out.push(Diagnostic::warning(
            "nyquist-margin",
            format!("signal content up to {max_freq:.3} MHz uses more than half the grid Nyquist band"),
        ));
    }
    check_detection(&s.detection, max_freq, &mut out);

    let switches = s.schedule.switch_times();
    for (i, p) in s.pulses.iter().enumerate() {
        for &t in &switches {
            if (t - p.peak_time).abs() < 1.5 * p.fwhm {
                out.push(Diagnostic::warning(
                    "event-order",
                    format!(
                        "gradient switch at {t} µs falls within 1.5 FWHM of pulse {i} (peak {} µs)",
                        p.peak_time
                    ),
                ));
            }
        }
    }
    if let Some(&last) = switches.last() {
        if last + 3.0 * max_fwhm > t_total + 1e-9 {
            out.push(Diagnostic::error(
                "duration",
                format!(
                    "run ends at {t_total} µs, before the last switch ({last} µs) plus 3 input FWHM"
                ),
            ));
        }
    }
    for w in &s.meta.windows {
        if w.t_lo >= w.t_hi || w.t_hi > t_total + 1e-9 || w.t_lo < -1e-9 {
            out.push(Diagnostic::error(
                "window",
                format!("analysis window '{}' ({}, {}) lies outside the run", w.label, w.t_lo, w.t_hi),
            ));
        }
    }

    if s.meta.protocol == "frequency-shift" {
        if let (Some(first), Some(last)) = (s.schedule.segments.first(), s.schedule.segments.last()) {
            let delta_os = last.offset_delta_os() + first.offset_delta_os();
            if delta_os.abs() > 0.5 * first.bandwidth() {
                out.push(Diagnostic::warning(
                    "memory-edge",
                    format!(
                        "offset {delta_os:.3} MHz exceeds half the memory bandwidth: content near memory edge, expect dispersion"
                    ),
                ));
            }
        }
    }
    out
}

fn check_detection(cfg: &DetectionConfig, max_freq: f64, out: &mut Vec<Diagnostic>) {
    let needed = DETECTION_OVERSAMPLING * (cfg.lo_offset.abs() + max_freq);
    if cfg.sample_rate < needed {
        out.push(Diagnostic::error(
            "detection-sampling",
            format!(
                "detector sample rate {} /µs is below {DETECTION_OVERSAMPLING} x (|LO| + signal extent) = {needed:.1} /µs",
                cfg.sample_rate
            ),
        ));
    }
}
