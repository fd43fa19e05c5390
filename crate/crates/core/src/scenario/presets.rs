use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::events::{schedule_from_events, RegionAction, RegionFlipEvent};
use super::pulse::{PulseSpec, Sideband};
use super::{AnalysisWindow, Scenario, ScenarioMeta, WindowRole};
use crate::detection::DetectionConfig;
use crate::dynamics::{EnsembleParams, SimulationGrid};
use crate::error::{GemError, Result};
use crate::units::gaussian_bandwidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    BasicEcho,
    FrequencyShift,
    Bandwidth,
    SpectralFilter,
    FourierRecall,
    InterferenceDiffFreq,
    InterferenceSameFreq,
}

impl PresetKind {
    pub const ALL: [PresetKind; 7] = [
        PresetKind::BasicEcho,
        PresetKind::FrequencyShift,
        PresetKind::Bandwidth,
        PresetKind::SpectralFilter,
        PresetKind::FourierRecall,
        PresetKind::InterferenceDiffFreq,
        PresetKind::InterferenceSameFreq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetKind::BasicEcho => "basic-echo",
            PresetKind::FrequencyShift => "frequency-shift",
            PresetKind::Bandwidth => "bandwidth",
            PresetKind::SpectralFilter => "spectral-filter",
            PresetKind::FourierRecall => "fourier-recall",
            PresetKind::InterferenceDiffFreq => "interference-diff-freq",
            PresetKind::InterferenceSameFreq => "interference-same-freq",
        }
    }

    /// Every parameter the preset accepts, with its default.
    pub fn defaults(self) -> BTreeMap<String, f64> {
        let mut m: BTreeMap<String, f64> = [
            ("beta", 2.0),
            ("n_z", 512.0),
            ("samples_per_fwhm", 160.0),
            ("gamma", 0.0),
            ("gamma0", 0.0),
            ("scatter_extra", 0.0),
            ("g_eff", 1.0),
            ("amplitude", 1.0),
            ("tail", 3.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let specific: &[(&str, f64)] = match self {
            PresetKind::BasicEcho => &[("fwhm", 2.0), ("bw_ratio", 4.0), ("storage", 24.0), ("flip", 1.0)],
            PresetKind::FrequencyShift => &[("fwhm", 2.0), ("bw_ratio", 4.0), ("storage", 24.0), ("delta_os", 0.7)],
            PresetKind::Bandwidth => &[("fwhm", 2.0), ("bw_ratio", 4.0), ("storage", 24.0), ("ratio", 2.0)],
            PresetKind::SpectralFilter => &[("fwhm", 4.0), ("separation", 0.7), ("storage", 6.0)],
            PresetKind::FourierRecall => &[("fwhm", 4.0), ("separation", 0.7), ("storage", 6.0), ("sideband_amplitude", 1.0)],
            PresetKind::InterferenceDiffFreq => &[
                ("fwhm", 4.0),
                ("separation", 0.7),
                ("storage", 4.0),
                ("dtheta", 0.0),
                ("park_offset", 3.0),
            ],
            PresetKind::InterferenceSameFreq => &[
                ("fwhm", 4.0),
                ("bw_ratio", 4.0),
                ("storage", 4.0),
                ("beta", 0.2),
                ("dtheta", 0.0),
                ("park_offset", 3.0),
            ],
        };
        for (k, v) in specific {
            m.insert(k.to_string(), *v);
        }
        m
    }
}

impl fmt::Display for PresetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetKind {
    type Err = GemError;
    fn from_str(s: &str) -> Result<Self> {
        PresetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GemError::Semantic {
                key: "protocol.kind".into(),
                message: format!(
                    "unknown preset '{s}' (expected one of {})",
                    PresetKind::ALL.map(|k| k.name()).join(", ")
                ),
            })
    }
}

/// Overrides of preset defaults, by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PresetParams(pub BTreeMap<String, f64>);

impl PresetParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    /// Defaults for `kind` overlaid with these values; unknown names are rejected.
    pub fn resolve(&self, kind: PresetKind) -> Result<BTreeMap<String, f64>> {
        let mut all = kind.defaults();
        for (k, v) in &self.0 {
            match all.get_mut(k) {
                Some(slot) => {
                    if !v.is_finite() {
                        return Err(GemError::Semantic {
                            key: format!("protocol.params.{k}"),
                            message: "value must be finite".into(),
                        });
                    }
                    *slot = *v;
                }
                None => {
                    return Err(GemError::Semantic {
                        key: format!("protocol.params.{k}"),
                        message: format!("not a parameter of preset '{kind}'"),
                    })
                }
            }
        }
        Ok(all)
    }
}

struct Ctx {
    p: BTreeMap<String, f64>,
    w: f64,
    n_z: usize,
    dt: f64,
}

impl Ctx {
    fn new(kind: PresetKind, params: &PresetParams) -> Result<Self> {
        let p = params.resolve(kind)?;
        let w = p["fwhm"];
        let spf = p["samples_per_fwhm"];
        let n_z = p["n_z"];
        if !(w > 0.0) || !(spf > 0.0) {
            return Err(GemError::Semantic {
                key: "protocol.params.fwhm".into(),
                message: "fwhm and samples_per_fwhm must be positive".into(),
            });
        }
        if !(n_z >= 16.0) || n_z.fract() != 0.0 {
            return Err(GemError::Semantic {
                key: "protocol.params.n_z".into(),
                message: format!("n_z = {n_z} must be an integer >= 16"),
            });
        }
        Ok(Ctx {
            w,
            dt: w / spf,
            n_z: n_z as usize,
            p,
        })
    }

    fn get(&self, k: &str) -> f64 {
        self.p[k]
    }

    fn bp(&self) -> f64 {
        gaussian_bandwidth(self.w)
    }

    fn z(&self) -> Vec<f64> {
        (0..self.n_z).map(|j| j as f64 / (self.n_z - 1) as f64).collect()
    }

    fn pulse(&self, peak: f64, freq: f64, phase: f64) -> PulseSpec {
        PulseSpec {
            amplitude: self.get("amplitude"),
            detuning_offset: freq,
            phase,
            ..PulseSpec::gaussian(self.w, peak)
        }
    }

    /// Ensemble whose optical depth is `beta` for a gradient of `slope` MHz per memory length.
    fn ensemble(&self, slope: f64) -> EnsembleParams {
        EnsembleParams {
            gamma: self.get("gamma"),
            gamma0: self.get("gamma0"),
            scatter_extra: self.get("scatter_extra"),
            ..EnsembleParams::with_optical_depth(self.get("beta"), slope, self.get("g_eff"), 1.0)
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        kind: PresetKind,
        t_total: f64,
        initial: Vec<f64>,
        events: Vec<RegionFlipEvent>,
        pulses: Vec<PulseSpec>,
        ensemble: EnsembleParams,
        meta: MetaParts,
    ) -> Result<Scenario> {
        let grid = SimulationGrid::covering(self.n_z, t_total, self.dt)?;
        let schedule = schedule_from_events(initial, &events, grid.duration(), &self.z())?
            .with_coupling(vec![(0.0, grid.duration())]);
        Ok(Scenario {
            grid,
            ensemble,
            pulses,
            schedule,
            detection: DetectionConfig::default(),
            meta: ScenarioMeta {
                protocol: kind.name().to_string(),
                params: self.p.clone(),
                windows: meta.windows,
                pulse_regions: meta.regions,
                events,
                expected: meta.expected.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            },
        })
    }
}

struct MetaParts {
    windows: Vec<AnalysisWindow>,
    regions: Vec<(f64, f64)>,
    expected: Vec<(&'static str, f64)>,
}

fn set_linear(slope: f64, offset: f64) -> RegionAction {
    RegionAction::SetLinear { slope, offset }
}

fn ramp(z: &[f64], slope: f64) -> Vec<f64> {
    z.iter().map(|&x| slope * (x - 0.5)).collect()
}

/// Build the scenario for a protocol.
///
/// Conventions shared by all presets: a rotating-frame component at
/// frequency `ν` is resonant with atoms at `δ = −ν`; the input pulse peaks
/// at `3 W` and the first gradient switch comes `2 W` after the last pulse
/// stored under it; local reversals mirror each region about its own centre
/// so a region re-emits at the frequency it absorbed.
pub fn preset_scenario(kind: PresetKind, params: &PresetParams) -> Result<Scenario> {
    let c = Ctx::new(kind, params)?;
    let w = c.w;
    let t_p = 3.0 * w;
    let tail = c.get("tail") * w;
    let st = c.get("storage") * w;
    let z = c.z();
    match kind {
        PresetKind::BasicEcho | PresetKind::FrequencyShift | PresetKind::Bandwidth => {
            let b = c.get("bw_ratio") * c.bp();
            let t_f = t_p + st;
            let (out_slope, delta_os, flip) = match kind {
                PresetKind::BasicEcho => (b, 0.0, c.get("flip") != 0.0),
                PresetKind::FrequencyShift => (b, c.get("delta_os"), true),
                _ => {
                    let r = c.get("ratio");
                    if !(r > 0.0) {
                        return Err(GemError::Semantic {
                            key: "protocol.params.ratio".into(),
                            message: "ratio must be positive".into(),
                        });
                    }
                    (r * b, 0.0, true)
                }
            };
            let r = out_slope / b;
            let t_echo = t_f + (t_f - t_p) / r;
            let w_out = w / r;
            let mut windows = vec![AnalysisWindow::new("P", WindowRole::Input, t_p, 2.5 * w, 0.0)];
            let mut events = Vec::new();
            let mut expected = vec![("t_input", t_p), ("w_in", w), ("bandwidth", b)];
            let t_total = if flip {
                events.push(RegionFlipEvent::global(t_f, set_linear(-out_slope, delta_os)));
                windows.push(AnalysisWindow::new("E", WindowRole::Echo, t_echo, 2.5 * w_out.max(0.5 * w), -delta_os));
                expected.extend([
                    ("flip_time", t_f),
                    ("tau", t_f - t_p),
                    ("t_echo", t_echo),
                    ("w_out", w_out),
                    ("omega_shift", -delta_os),
                ]);
                t_echo + tail
            } else {
                t_f + (t_f - t_p) + tail
            };
            let mut s = c.finish(
                kind,
                t_total,
                ramp(&z, b),
                events,
                vec![c.pulse(t_p, 0.0, 0.0)],
                c.ensemble(b),
                MetaParts {
                    windows,
                    regions: vec![(0.0, 1.0)],
                    expected,
                },
            )?;
            if flip {
                // integrate the recall in the frame of the shifted echo
                if let Some(last) = s.schedule.segments.last_mut() {
                    last.frame_mhz = -delta_os;
                }
            }
            Ok(s)
        }
        PresetKind::SpectralFilter => {
            let sep = c.get("separation");
            let b = 2.0 * sep;
            let (lo, hi) = (-0.5 * sep, 0.5 * sep);
            // ν = +sep/2 sits in the first half (δ = −sep/2), ν = −sep/2 in the second
            let pulse = PulseSpec {
                sidebands: vec![Sideband {
                    offset: sep,
                    amplitude: 1.0,
                    phase: 0.0,
                }],
                ..c.pulse(t_p, lo, 0.0)
            };
            let t_f1 = t_p + st;
            let t_f2 = t_f1 + st;
            let e1 = 2.0 * t_f1 - t_p;
            let e2 = 2.0 * t_f2 - t_p;
            let events = vec![
                RegionFlipEvent::new(t_f1, 0.0, 0.5, set_linear(-b, -hi)),
                RegionFlipEvent::new(t_f2, 0.5, 1.0, set_linear(-b, -lo)),
            ];
            c.finish(
                kind,
                e2 + tail,
                ramp(&z, b),
                events,
                vec![pulse],
                c.ensemble(b),
                MetaParts {
                    windows: vec![
                        AnalysisWindow::new("E1", WindowRole::Echo, e1, 2.5 * w, hi),
                        AnalysisWindow::new("E2", WindowRole::Echo, e2, 2.5 * w, lo),
                    ],
                    regions: vec![(0.0, 1.0)],
                    expected: vec![("t_e1", e1), ("t_e2", e2), ("freq_e1", hi), ("freq_e2", lo), ("bandwidth", b)],
                },
            )
        }
        PresetKind::FourierRecall => {
            let sep = c.get("separation");
            let a = c.get("sideband_amplitude");
            let b = 3.0 * sep;
            let pulse = PulseSpec {
                sidebands: vec![
                    Sideband {
                        offset: -sep,
                        amplitude: a,
                        phase: 0.0,
                    },
                    Sideband {
                        offset: sep,
                        amplitude: a,
                        phase: 0.0,
                    },
                ],
                ..c.pulse(t_p, 0.0, 0.0)
            };
            let third = 1.0 / 3.0;
            let mut events = Vec::new();
            let mut windows = Vec::new();
            let mut expected = vec![("bandwidth", b)];
            let labels = ["E1", "E2", "E3"];
            let t_keys = ["t_e1", "t_e2", "t_e3"];
            let f_keys = ["freq_e1", "freq_e2", "freq_e3"];
            for k in 0..3 {
                let (z_lo, z_hi) = (k as f64 * third, (k + 1) as f64 * third);
                let centre = b * (0.5 * (z_lo + z_hi) - 0.5);
                let t_f = t_p + st * (k + 1) as f64;
                let t_e = 2.0 * t_f - t_p;
                let freq = -centre;
                events.push(RegionFlipEvent::new(t_f, z_lo, if k == 2 { 1.0 } else { z_hi }, set_linear(-b, centre)));
                windows.push(AnalysisWindow::new(labels[k], WindowRole::Echo, t_e, 2.5 * w, freq));
                expected.push((t_keys[k], t_e));
                expected.push((f_keys[k], freq));
            }
            let t_last = expected[expected.len() - 2].1;
            c.finish(
                kind,
                t_last + tail,
                ramp(&z, b),
                events,
                vec![pulse],
                c.ensemble(b),
                MetaParts {
                    windows,
                    regions: vec![(0.0, 1.0)],
                    expected,
                },
            )
        }
        PresetKind::InterferenceDiffFreq => {
            let sep = c.get("separation");
            let park = c.get("park_offset");
            let b = 2.0 * sep;
            let slope = -b;
            let (f1, f2) = (-0.5 * sep, 0.5 * sep);
            let t1 = t_p;
            let t_s = t1 + st;
            let t2 = t_s + 2.0 * w;
            let t_f = t2 + st;
            let t_e = 2.0 * t_f - t2;
            let mut initial = ramp(&z, slope);
            let park_second = RegionFlipEvent::new(0.0, 0.5, 1.0, set_linear(0.0, park));
            park_second.apply(&mut initial, &z);
            let events = vec![
                RegionFlipEvent::new(t_s, 0.0, 0.5, set_linear(0.0, park)),
                RegionFlipEvent::new(t_s, 0.5, 1.0, set_linear(slope, -b * 0.25)),
                RegionFlipEvent::global(t_f, set_linear(b, 0.0)),
            ];
            // a global reversal mirrors each echo about zero
            let (e1, e2) = (-f1, -f2);
            c.finish(
                kind,
                t_e + tail,
                initial,
                events,
                vec![c.pulse(t1, f1, 0.0), c.pulse(t2, f2, c.get("dtheta"))],
                c.ensemble(b),
                MetaParts {
                    windows: vec![
                        AnalysisWindow::new("P1", WindowRole::Input, t1, 2.5 * w, f1),
                        AnalysisWindow::new("P2", WindowRole::Input, t2, 2.5 * w, f2),
                        AnalysisWindow::new("E", WindowRole::Echo, t_e, 2.5 * w, 0.5 * (e1 + e2)),
                    ],
                    regions: vec![(0.0, 0.5), (0.5, 1.0)],
                    expected: vec![
                        ("t_echo", t_e),
                        ("freq_e1", e1),
                        ("freq_e2", e2),
                        ("bandwidth", b),
                    ],
                },
            )
        }
        PresetKind::InterferenceSameFreq => {
            let park = c.get("park_offset");
            let bh = c.get("bw_ratio") * c.bp();
            let slope = 2.0 * bh;
            let t1 = t_p;
            let t_s = t1 + st;
            let t2 = t_s + 2.0 * w;
            let t_r1 = t2 + st;
            let t_e1 = 2.0 * t_r1 - t2;
            let t_r2 = t_e1 + st;
            let t_e2 = 2.0 * t_r2 - t_e1;
            let first = |t: f64, action: RegionAction| RegionFlipEvent::new(t, 0.0, 0.5, action);
            let second = |t: f64, action: RegionAction| RegionFlipEvent::new(t, 0.5, 1.0, action);
            let mut initial = vec![0.0; z.len()];
            first(0.0, set_linear(0.0, park)).apply(&mut initial, &z);
            second(0.0, set_linear(slope, 0.0)).apply(&mut initial, &z);
            let events = vec![
                first(t_s, set_linear(slope, 0.0)),
                second(t_s, set_linear(0.0, park)),
                first(t_r1, set_linear(-slope, 0.0)),
                second(t_r1, set_linear(-slope, 0.0)),
                second(t_r2, set_linear(slope, 0.0)),
            ];
            c.finish(
                kind,
                t_e2 + tail,
                initial,
                events,
                vec![c.pulse(t1, 0.0, 0.0), c.pulse(t2, 0.0, c.get("dtheta"))],
                c.ensemble(slope),
                MetaParts {
                    windows: vec![
                        AnalysisWindow::new("P1", WindowRole::Input, t1, 2.5 * w, 0.0),
                        AnalysisWindow::new("P2", WindowRole::Input, t2, 2.5 * w, 0.0),
                        AnalysisWindow::new("E1", WindowRole::Echo, t_e1, 2.5 * w, 0.0),
                        AnalysisWindow::new("E2", WindowRole::Echo, t_e2, 2.5 * w, 0.0),
                    ],
                    regions: vec![(0.5, 1.0), (0.0, 0.5)],
                    expected: vec![("t_e1", t_e1), ("t_e2", t_e2), ("bandwidth", bh)],
                },
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in PresetKind::ALL {
            assert_eq!(k.name().parse::<PresetKind>().unwrap(), k);
        }
        assert!("basic".parse::<PresetKind>().is_err());
    }

    #[test]
    fn unknown_param_is_named() {
        let err = preset_scenario(PresetKind::BasicEcho, &PresetParams::new().with("gradiant", 1.0)).unwrap_err();
        assert!(err.to_string().contains("gradiant"));
    }

    #[test]
    fn frequency_shift_recall_profile() {
        let s = preset_scenario(PresetKind::FrequencyShift, &PresetParams::new().with("delta_os", 1.4)).unwrap();
        let (a, b) = (&s.schedule.segments[0].profile, &s.schedule.segments[1].profile);
        for (x, y) in a.iter().zip(b) {
            assert!((y - (-x + 1.4)).abs() < 1e-12);
        }
    }

    #[test]
    fn bandwidth_slope_ratio_and_expected_width() {
        let s = preset_scenario(PresetKind::Bandwidth, &PresetParams::new().with("ratio", 3.0)).unwrap();
        let r = s.schedule.segments[1].slope_eta() / s.schedule.segments[0].slope_eta();
        assert!((r + 3.0).abs() < 1e-12);
        assert!((s.meta.expected["w_out"] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn diff_freq_parks_the_other_half() {
        let s = preset_scenario(PresetKind::InterferenceDiffFreq, &PresetParams::new()).unwrap();
        assert_eq!(s.pulses.len(), 2);
        assert!((s.pulses[1].detuning_offset - s.pulses[0].detuning_offset - 0.7).abs() < 1e-12);
        let z = s.grid.z_normalized();
        let at = |t: f64| s.schedule.segment_at(t).unwrap();
        let flat = |seg: &crate::dynamics::DetuningSegment, upper: bool| {
            let vals: Vec<f64> = z
                .iter()
                .zip(&seg.profile)
                .filter(|(x, _)| (**x >= 0.5) == upper)
                .map(|(_, d)| *d)
                .collect();
            vals.iter().all(|d| (d - vals[0]).abs() < 1e-12)
        };
        assert!(flat(at(s.pulses[0].peak_time), true));
        assert!(!flat(at(s.pulses[0].peak_time), false));
        assert!(flat(at(s.pulses[1].peak_time), false));
        assert!(!flat(at(s.pulses[1].peak_time), true));
        assert_eq!(s.schedule.segments.len(), 3);
    }

    #[test]
    fn presets_are_deterministic() {
        for k in PresetKind::ALL {
            let a = serde_json::to_vec(&preset_scenario(k, &PresetParams::new()).unwrap()).unwrap();
            let b = serde_json::to_vec(&preset_scenario(k, &PresetParams::new()).unwrap()).unwrap();
            assert_eq!(a, b, "{k}");
        }
    }
}
