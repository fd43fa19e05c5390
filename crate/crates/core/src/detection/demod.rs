use num_complex::Complex64;

use crate::error::{GemError, Result};
use crate::units::TWO_PI;

/// Filter span in units of `1 / cutoff`.
const SPAN_CYCLES: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub t: Vec<f64>,
    pub values: Vec<Complex64>,
    pub freq: f64,
}

/// Symmetric Blackman-windowed sinc low-pass, unit DC gain.
///
/// The kernel spans `8 / cutoff` µs, giving a transition band of about
/// `0.7 cutoff` centred on the cutoff and > 70 dB stop-band rejection.
pub fn lowpass_taps(cutoff: f64, dt: f64) -> Vec<f64> {
    let half = ((0.5 * SPAN_CYCLES / cutoff) / dt).ceil() as isize;
    let m = (2 * half) as f64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let x = k as f64 * dt;
            let ideal = if k == 0 {
                2.0 * cutoff
            } else {
                (TWO_PI * cutoff * x).sin() / (std::f64::consts::PI * x)
            };
            let n = (k + half) as f64;
            let w = 0.42 - 0.5 * (TWO_PI * n / m).cos() + 0.08 * (2.0 * TWO_PI * n / m).cos();
            ideal * w
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Mix the trace down by `freq` and low-pass it with a zero-phase FIR at
/// `freq / 2`, returning the complex envelope inside `window`.
///
/// A tone `cos(2π freq t + φ)` demodulates to `½ e^{iφ}`.
pub fn demodulate(trace: &[f64], t: &[f64], freq: f64, window: (f64, f64)) -> Result<Demodulated> {
    if trace.len() != t.len() || t.len() < 2 {
        return Err(GemError::InvalidParameter("trace and time arrays must match".into()));
    }
    let dt = t[1] - t[0];
    let nyquist = 0.5 / dt;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(GemError::InvalidParameter(format!(
            "demodulation frequency {freq} MHz outside (0, {nyquist})"
        )));
    }
    let (lo, hi) = window;
    if !(lo < hi) || lo < t[0] - 1e-9 || hi > t[t.len() - 1] + 1e-9 {
        return Err(GemError::InvalidParameter(format!(
            "window ({lo}, {hi}) not inside trace [{}, {}]",
            t[0],
            t[t.len() - 1]
        )));
    }
    let cutoff = 0.5 * freq;
    if hi - lo < 2.0 / cutoff {
        return Err(GemError::InvalidParameter(format!(
            "window of {:.3} µs too short for a {cutoff:.3} MHz low-pass (needs {:.3} µs)",
            hi - lo,
            2.0 / cutoff
        )));
    }
    let taps = lowpass_taps(cutoff, dt);
    let half = (taps.len() / 2) as isize;
    let mixed: Vec<Complex64> = trace
        .iter()
        .zip(t)
        .map(|(&s, &tk)| Complex64::from_polar(s, -TWO_PI * freq * tk))
        .collect();
    let i_lo = ((lo - t[0]) / dt).ceil().max(0.0) as usize;
    let i_hi = (((hi - t[0]) / dt).floor() as usize).min(t.len() - 1);
    let n = mixed.len() as isize;
    let mut values = Vec::with_capacity(i_hi + 1 - i_lo);
    for i in i_lo..=i_hi {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &w) in taps.iter().enumerate() {
            let j = i as isize + k as isize - half;
            if j >= 0 && j < n {
                acc += mixed[j as usize] * w;
            }
        }
        values.push(acc);
    }
    Ok(Demodulated {
        t: t[i_lo..=i_hi].to_vec(),
        values,
        freq,
    })
}
