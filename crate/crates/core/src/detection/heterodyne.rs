use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spectrum::spectral_extent;
use crate::error::{GemError, Result};
use crate::units::TWO_PI;

/// Heterodyne detection settings. `lo_offset` is the local-oscillator
/// frequency relative to the simulation's rotating frame (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    pub lo_offset: f64,
    pub lo_phase: f64,
    /// Power transmission of the filter cell between memory and detector.
    pub filter_transmission: f64,
    /// Output samples per µs.
    pub sample_rate: f64,
    /// Standard deviation of additive white noise on the trace; 0 disables it.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            lo_offset: -5.0,
            lo_phase: 0.0,
            filter_transmission: 0.7,
            sample_rate: 100.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl DetectionConfig {
    pub fn check(&self) -> Result<()> {
        if self.lo_offset == 0.0 || !self.lo_offset.is_finite() {
            return Err(GemError::InvalidParameter(
                "heterodyne needs a non-zero LO offset".into(),
            ));
        }
        if !(self.filter_transmission > 0.0 && self.filter_transmission <= 1.0) {
            return Err(GemError::InvalidParameter(format!(
                "filter transmission {} outside (0, 1]",
                self.filter_transmission
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(GemError::InvalidParameter("sample rate must be positive".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(GemError::InvalidParameter("noise_std must be non-negative".into()));
        }
        Ok(())
    }

    /// Beat frequency at which a rotating-frame component `freq` appears.
    pub fn beat_frequency(&self, freq: f64) -> f64 {
        freq - self.lo_offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneTrace {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

/// Half-width of the interpolation kernel in input samples.
const KERNEL_HALF_WIDTH: isize = 16;
const KAISER_BETA: f64 = 12.0;

/// Modified Bessel function I₀ by its power series.
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn kaiser(u: f64, half: f64) -> f64 {
    let r = u / half;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Band-limited resampling of a uniformly sampled complex series onto `t_new`
/// with a normalised Kaiser-windowed sinc kernel. Samples outside the record
/// are zero.
pub fn sinc_resample(values: &[Complex64], t0: f64, dt: f64, t_new: &[f64]) -> Vec<Complex64> {
    let n = values.len() as isize;
    let a = KERNEL_HALF_WIDTH;
    t_new
        .iter()
        .map(|&t| {
            let x = (t - t0) / dt;
            let base = x.floor() as isize;
            let frac = x - base as f64;
            if frac.abs() < 1e-12 && base >= 0 && base < n {
                return values[base as usize];
            }
            let mut acc = Complex64::new(0.0, 0.0);
            let mut wsum = 0.0;
            for k in (base - a + 1)..=(base + a) {
                let u = x - k as f64;
                let w = sinc(u) * kaiser(u, a as f64);
                wsum += w;
                if k >= 0 && k < n {
                    acc += values[k as usize] * w;
                }
            }
            acc / wsum
        })
        .collect()
}

/// Noiseless photocurrent `√T_f · 2 Re[E(t) e^{-i(2π f_LO t + φ_LO)}]` at the
/// envelope's own sample times.
pub fn beat_signal(envelope: &[Complex64], t: &[f64], cfg: &DetectionConfig) -> Vec<f64> {
    let amp = 2.0 * cfg.filter_transmission.sqrt();
    t.iter()
        .zip(envelope)
        .map(|(&tk, e)| {
            let lo = Complex64::from_polar(1.0, -(TWO_PI * cfg.lo_offset * tk + cfg.lo_phase));
            amp * (e * lo).re
        })
        .collect()
}

/// Real heterodyne photocurrent
/// `s(t) = √T_f · 2 Re[E(t) e^{-i(2π f_LO t + φ_LO)}]`, resampled at the
/// configured rate over the span of `t`.
///
/// Fails when the sample rate is below eight times `|f_LO|` plus the
/// envelope's spectral extent.
pub fn heterodyne_trace(e_out: &[Complex64], t: &[f64], cfg: &DetectionConfig) -> Result<HeterodyneTrace> {
    cfg.check()?;
    if e_out.len() != t.len() || t.len() < 2 {
        return Err(GemError::InvalidParameter(
            "heterodyne needs matching envelope and time arrays of length >= 2".into(),
        ));
    }
    let dt = t[1] - t[0];
    let extent = spectral_extent(e_out, dt);
    let required = 8.0 * (cfg.lo_offset.abs() + extent);
    if cfg.sample_rate < required {
        return Err(GemError::Undersampled(format!(
            "sample rate {} /µs is below 8 x (|LO| + bandwidth) = {required:.3} /µs",
            cfg.sample_rate
        )));
    }
    let span = t[t.len() - 1] - t[0];
    let n_out = (span * cfg.sample_rate).floor() as usize + 1;
    let ts: Vec<f64> = (0..n_out).map(|k| t[0] + k as f64 / cfg.sample_rate).collect();
    let env = sinc_resample(e_out, t[0], dt, &ts);
    let mut s = beat_signal(&env, &ts, cfg);
    if cfg.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.noise_std).expect("finite noise level");
        for v in &mut s {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(HeterodyneTrace { t: ts, s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn constant_envelope_gives_cosine() {
        let cfg = DetectionConfig {
            lo_offset: 2.0,
            lo_phase: 0.4,
            sample_rate: 40.0,
            ..Default::default()
        };
        let t = times(401, 0.025);
        let a = 0.3;
        let e = vec![Complex64::new(a, 0.0); t.len()];
        let tr = heterodyne_trace(&e, &t, &cfg).unwrap();
        let tf = cfg.filter_transmission.sqrt();
        for (tk, s) in tr.t.iter().zip(&tr.s) {
            let expect = 2.0 * a * tf * (TWO_PI * 2.0 * tk + 0.4).cos();
            assert!((s - expect).abs() < 1e-9, "{s} vs {expect}");
        }
    }

    #[test]
    fn zero_envelope_gives_zero_trace() {
        let cfg = DetectionConfig::default();
        let t = times(200, 0.02);
        let tr = heterodyne_trace(&vec![Complex64::new(0.0, 0.0); 200], &t, &cfg).unwrap();
        assert!(tr.s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn undersampling_is_rejected() {
        let cfg = DetectionConfig {
            lo_offset: 5.0,
            sample_rate: 30.0,
            ..Default::default()
        };
        let t = times(200, 0.02);
        let e = vec![Complex64::new(1.0, 0.0); 200];
        assert!(matches!(heterodyne_trace(&e, &t, &cfg), Err(GemError::Undersampled(_))));
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = DetectionConfig {
            noise_std: 0.01,
            seed: 7,
            ..Default::default()
        };
        let t = times(200, 0.02);
        let e = vec![Complex64::new(1.0, 0.0); 200];
        let a = heterodyne_trace(&e, &t, &cfg).unwrap();
        let b = heterodyne_trace(&e, &t, &cfg).unwrap();
        assert_eq!(a, b);
        let other = heterodyne_trace(&e, &t, &DetectionConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn resampling_smooth_signal_is_accurate() {
        let dt = 0.025;
        let t = times(800, dt);
        let f = |t: f64| Complex64::from_polar((-(t - 10.0).powi(2) / 4.0).exp(), TWO_PI * 1.3 * t);
        let v: Vec<Complex64> = t.iter().map(|&x| f(x)).collect();
        let tn: Vec<f64> = (0..500).map(|k| 2.0 + k as f64 * 0.0317).collect();
        let r = sinc_resample(&v, 0.0, dt, &tn);
        for (x, y) in tn.iter().zip(&r) {
            assert!((f(*x) - y).norm() < 1e-6, "{x} {}", (f(*x) - y).norm());
        }
    }

    #[test]
    fn transmission_scales_power_linearly() {
        let t = times(200, 0.02);
        let e: Vec<Complex64> = t.iter().map(|&x| Complex64::new((-(x - 2.0).powi(2)).exp(), 0.0)).collect();
        let p = |tf: f64| {
            let cfg = DetectionConfig {
                filter_transmission: tf,
                ..Default::default()
            };
            heterodyne_trace(&e, &t, &cfg).unwrap().s.iter().map(|s| s * s).sum::<f64>()
        };
        assert!((p(0.35) / p(0.7) - 0.5).abs() < 1e-12);
    }
}
