//! Post-processing of a run: the heterodyne/demodulation/fit chain applied
//! to every analysis window of a scenario, plus echo-quality figures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detection::{
    band_energy, demodulate, dominant_frequency, fit_gaussian_envelope, fit_modulated_gaussian,
    fit_relative_phase, heterodyne_trace, pulse_energy, FitResult, HeterodyneTrace,
};
use crate::dynamics::{excitation_balance, RunOptions, SimulationRecord};
use crate::error::{GemError, Result};
use crate::scenario::{AnalysisWindow, Scenario, WindowRole};

/// Number of fitted sigmas on each side of the envelope peak kept in the refined fit window.
const FIT_HALF_WIDTH_SIGMAS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAnalysis {
    pub label: String,
    pub role: WindowRole,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Beat frequency used for demodulation (MHz, relative to the LO).
    pub demod_freq: f64,
    /// `∫|E|²dt` of the envelope over the window.
    pub energy: f64,
    /// Time of maximum |E| (parabolic refinement between samples).
    pub peak_time: f64,
    /// Fit to the demodulated envelope.
    pub fit: Option<FitResult>,
    /// Fit to the raw heterodyne trace.
    pub raw_fit: Option<FitResult>,
    /// Spectral energy of the envelope within half the spacing to the nearest other window frequency.
    pub band_energy: Option<f64>,
    /// Largest spectral energy around any other window's frequency.
    pub wrong_band_energy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAnalysis {
    pub windows: Vec<WindowAnalysis>,
    pub input_energy: f64,
    pub output_energy: f64,
    pub efficiency: f64,
    pub excitation_balance: f64,
    /// Normalised cross-correlation of |E_out| in the echo window with the
    /// time-reversed |E_in|, for single-echo protocols.
    pub echo_ncc: Option<f64>,
}

impl RunAnalysis {
    pub fn window(&self, label: &str) -> Option<&WindowAnalysis> {
        self.windows.iter().find(|w| w.label == label)
    }
}

fn peak_time(t: &[f64], e: &[Complex64], lo: f64, hi: f64) -> f64 {
    let idx: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= lo && t[k] <= hi).collect();
    let Some(&k) = idx.iter().max_by(|&&a, &&b| e[a].norm_sqr().total_cmp(&e[b].norm_sqr())) else {
        return f64::NAN;
    };
    if k == 0 || k + 1 >= t.len() {
        return t[k];
    }
    let (a, b, c) = (e[k - 1].norm(), e[k].norm(), e[k + 1].norm());
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    t[k] + shift.clamp(-0.5, 0.5) * (t[1] - t[0])
}

fn window_energy(t: &[f64], e: &[Complex64], lo: f64, hi: f64) -> f64 {
    let part: Vec<Complex64> = t
        .iter()
        .zip(e)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(_, v)| *v)
        .collect();
    pulse_energy(&part, t[1] - t[0])
}

fn window_slice(t: &[f64], e: &[Complex64], lo: f64, hi: f64) -> Vec<Complex64> {
    t.iter()
        .zip(e)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(_, v)| *v)
        .collect()
}

/// Demodulate and fit one window: coarse fit over the whole window, then a
/// refit restricted to ±2 fitted sigmas around the envelope peak.
pub fn fit_window(
    trace: &HeterodyneTrace,
    demod_freq: f64,
    window: (f64, f64),
) -> Result<(FitResult, Option<FitResult>)> {
    let t_first = trace.t[0];
    let t_last = trace.t[trace.t.len() - 1];
    let (lo, hi) = (window.0.max(t_first), window.1.min(t_last));
    let d = demodulate(&trace.s, &trace.t, demod_freq, (lo, hi))?;
    let coarse = fit_gaussian_envelope(&d.values, &d.t, (lo, hi), demod_freq, None)?;
    let half = FIT_HALF_WIDTH_SIGMAS * coarse.sigma();
    let refined_window = ((coarse.t0 - half).max(lo), (coarse.t0 + half).min(hi));
    let fit = if refined_window.1 - refined_window.0 > 4.0 * (d.t[1] - d.t[0]) * 6.0 {
        fit_gaussian_envelope(&d.values, &d.t, refined_window, demod_freq, Some(&coarse))?
    } else {
        coarse
    };
    let raw_init = FitResult {
        amplitude: 2.0 * fit.amplitude,
        ..fit.clone()
    };
    let raw = fit_modulated_gaussian(&trace.s, &trace.t, refined_window, Some(&raw_init)).ok();
    Ok((fit, raw))
}

/// Run the measurement chain on every window listed in the scenario metadata.
pub fn analyze(s: &Scenario, rec: &SimulationRecord) -> Result<RunAnalysis> {
    let t = &rec.times;
    if t.len() < 2 {
        return Err(GemError::InvalidParameter("record too short to analyse".into()));
    }
    let dt = t[1] - t[0];
    let traces = [
        heterodyne_trace(&rec.e_in, t, &s.detection),
        heterodyne_trace(&rec.e_out, t, &s.detection),
    ];
    let freqs: Vec<f64> = s
        .meta
        .windows
        .iter()
        .filter(|w| w.role == WindowRole::Echo)
        .filter_map(|w| w.freq)
        .collect();
    let mut distinct: Vec<f64> = Vec::new();
    for f in &freqs {
        if distinct.iter().all(|d| (d - f).abs() > 1e-9) {
            distinct.push(*f);
        }
    }

    let mut windows = Vec::with_capacity(s.meta.windows.len());
    for w in &s.meta.windows {
        let (series, trace) = match w.role {
            WindowRole::Input => (&rec.e_in, &traces[0]),
            WindowRole::Echo => (&rec.e_out, &traces[1]),
        };
        windows.push(analyze_window(s, w, t, series, trace, dt, &distinct));
    }

    let input_energy = rec.input_energy();
    let output_energy = rec.output_energy();
    let efficiency = if input_energy > 0.0 { output_energy / input_energy } else { 0.0 };
    Ok(RunAnalysis {
        windows,
        input_energy,
        output_energy,
        efficiency,
        excitation_balance: excitation_balance(rec),
        echo_ncc: echo_ncc(s, rec),
    })
}

fn analyze_window(
    s: &Scenario,
    w: &AnalysisWindow,
    t: &[f64],
    series: &[Complex64],
    trace: &Result<HeterodyneTrace>,
    dt: f64,
    distinct: &[f64],
) -> WindowAnalysis {
    let energy = window_energy(t, series, w.t_lo, w.t_hi);
    let mut out = WindowAnalysis {
        label: w.label.clone(),
        role: w.role,
        t_lo: w.t_lo,
        t_hi: w.t_hi,
        demod_freq: f64::NAN,
        energy,
        peak_time: peak_time(t, series, w.t_lo, w.t_hi),
        fit: None,
        raw_fit: None,
        band_energy: None,
        wrong_band_energy: None,
        error: None,
    };
    if w.role == WindowRole::Echo {
        if let Some(f) = w.freq {
            if distinct.len() > 1 {
                let half = distinct
                    .iter()
                    .filter(|d| (*d - f).abs() > 1e-9)
                    .map(|d| (d - f).abs())
                    .fold(f64::INFINITY, f64::min)
                    / 2.0;
                let part = window_slice(t, series, w.t_lo, w.t_hi);
                out.band_energy = Some(band_energy(&part, dt, f - half, f + half));
                out.wrong_band_energy = distinct
                    .iter()
                    .filter(|d| (*d - f).abs() > 1e-9)
                    .map(|d| band_energy(&part, dt, d - half, d + half))
                    .reduce(f64::max);
            }
        }
    }
    let trace = match trace {
        Ok(tr) => tr,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let freq = match w.freq {
        Some(f) => s.detection.beat_frequency(f),
        None => {
            let part: Vec<f64> = trace
                .t
                .iter()
                .zip(&trace.s)
                .filter(|(x, _)| **x >= w.t_lo && **x <= w.t_hi)
                .map(|(_, v)| *v)
                .collect();
            dominant_frequency(&part, 1.0 / s.detection.sample_rate)
        }
    };
    out.demod_freq = freq;
    match fit_window(trace, freq, (w.t_lo, w.t_hi)) {
        Ok((fit, raw)) => {
            out.fit = Some(fit);
            out.raw_fit = raw;
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// `Σ|E_out(t)| |E_in(t_m − t)| / (‖E_out‖ ‖E_in‖)` over the echo window,
/// with `t_m = t_input + t_echo`. Needs windows "P" and "E" and equal input and
/// output gradient magnitudes.
fn echo_ncc(s: &Scenario, rec: &SimulationRecord) -> Option<f64> {
    let e = s.window("E")?;
    let p = s.window("P")?;
    let w_in = s.meta.expected.get("w_in")?;
    let w_out = s.meta.expected.get("w_out")?;
    if (w_in - w_out).abs() > 1e-12 * w_in {
        return None;
    }
    let t_m = p.center? + e.center?;
    Some(normalized_cross_correlation(&rec.times, &rec.e_out, &rec.e_in, t_m, e.t_lo, e.t_hi))
}

/// Normalised cross-correlation of `|a(t)|` with `|b(t_m − t)|` for `t ∈ [lo, hi]`,
/// `b` linearly interpolated.
pub fn normalized_cross_correlation(
    t: &[f64],
    a: &[Complex64],
    b: &[Complex64],
    t_m: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let dt = t[1] - t[0];
    let t0 = t[0];
    let interp = |x: f64| -> f64 {
        let u = (x - t0) / dt;
        if u < 0.0 || u > (b.len() - 1) as f64 {
            return 0.0;
        }
        let k = (u.floor() as usize).min(b.len() - 2);
        let f = u - k as f64;
        (1.0 - f) * b[k].norm() + f * b[k + 1].norm()
    };
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (k, &x) in t.iter().enumerate() {
        if x < lo || x > hi {
            continue;
        }
        let va = a[k].norm();
        let vb = interp(t_m - x);
        ab += va * vb;
        aa += va * va;
        bb += vb * vb;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// Single-pulse reference fits for a two-pulse interference scenario: the
/// echo of each pulse stored alone, with the second pulse's extra phase removed.
pub fn interference_controls(s: &Scenario, window: &str) -> Result<(FitResult, FitResult)> {
    if s.pulses.len() != 2 {
        return Err(GemError::InvalidParameter("interference controls need exactly two pulses".into()));
    }
    let w = s
        .window(window)
        .ok_or_else(|| GemError::InvalidParameter(format!("no analysis window '{window}'")))?;
    let mut reference = s.clone();
    reference.pulses[1].phase = 0.0;
    let freqs = [
        s.meta.expected.get("freq_e1").copied(),
        s.meta.expected.get("freq_e2").copied(),
    ];
    let mut fits = Vec::with_capacity(2);
    for (keep, freq) in [(0usize, freqs[0]), (1, freqs[1])] {
        let control = reference.without_pulse(1 - keep)?;
        let rec = control.run(&RunOptions::default())?;
        let trace = heterodyne_trace(&rec.e_out, &rec.times, &s.detection)?;
        let beat = s.detection.beat_frequency(freq.or(w.freq).unwrap_or(0.0));
        fits.push(fit_window(&trace, beat, (w.t_lo, w.t_hi))?.0);
    }
    let second = fits.pop().expect("two fits");
    let first = fits.pop().expect("two fits");
    Ok((first, second))
}

/// Relative output phase `Δθ_op` of the second pulse's echo, with every
/// other parameter fixed from the control fits.
pub fn relative_output_phase(
    s: &Scenario,
    rec: &SimulationRecord,
    window: &str,
    controls: &(FitResult, FitResult),
) -> Result<f64> {
    let w = s
        .window(window)
        .ok_or_else(|| GemError::InvalidParameter(format!("no analysis window '{window}'")))?;
    let trace = heterodyne_trace(&rec.e_out, &rec.times, &s.detection)?;
    let beat = s.detection.beat_frequency(w.freq.unwrap_or(0.0));
    let d = demodulate(&trace.s, &trace.t, beat, (w.t_lo, w.t_hi))?;
    fit_relative_phase(&d.values, &d.t, (w.t_lo, w.t_hi), beat, &controls.0, &controls.1)
}
