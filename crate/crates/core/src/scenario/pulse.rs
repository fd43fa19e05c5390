use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GemError, Result};
use crate::units::{gaussian_bandwidth, FWHM_PER_SIGMA, TWO_PI};

/// Minimum number of time steps per input FWHM.
pub const MIN_SAMPLES_PER_FWHM: f64 = 40.0;

/// Extra spectral component riding on the carrier: `a e^{i(2π f t + φ)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sideband {
    pub offset: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Gaussian input pulse. `fwhm` is the amplitude-envelope FWHM in µs and
/// `detuning_offset` the carrier frequency in the rotating frame (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub fwhm: f64,
    pub peak_time: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub detuning_offset: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub sidebands: Vec<Sideband>,
}

fn one() -> f64 {
    1.0
}

impl PulseSpec {
    pub fn gaussian(fwhm: f64, peak_time: f64) -> Self {
        PulseSpec {
            fwhm,
            peak_time,
            amplitude: 1.0,
            detuning_offset: 0.0,
            phase: 0.0,
            sidebands: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.fwhm > 0.0 && self.fwhm.is_finite()) {
            return Err(GemError::Validation(format!("pulse fwhm {} must be positive", self.fwhm)));
        }
        if !(self.amplitude >= 0.0) || !self.peak_time.is_finite() || !self.detuning_offset.is_finite() || !self.phase.is_finite() {
            return Err(GemError::Validation("pulse amplitude, timing and frequency must be finite".into()));
        }
        if self
            .sidebands
            .iter()
            .any(|s| !(s.offset.is_finite() && s.amplitude.is_finite() && s.phase.is_finite()))
        {
            return Err(GemError::Validation("sideband parameters must be finite".into()));
        }
        Ok(())
    }

    /// Spectral components as `(frequency MHz, complex amplitude)`, carrier first.
    pub fn components(&self) -> Vec<(f64, Complex64)> {
        let base = Complex64::from_polar(self.amplitude, self.phase);
        let mut out = vec![(self.detuning_offset, base)];
        out.extend(self.sidebands.iter().map(|s| {
            (
                self.detuning_offset + s.offset,
                base * Complex64::from_polar(s.amplitude, s.phase),
            )
        }));
        out
    }

    /// Amplitude-spectrum FWHM of each component (MHz).
    pub fn bandwidth(&self) -> f64 {
        gaussian_bandwidth(self.fwhm)
    }

    pub fn value_at(&self, t: f64) -> Complex64 {
        let s = self.fwhm / FWHM_PER_SIGMA;
        let g = (-(t - self.peak_time).powi(2) / (2.0 * s * s)).exp();
        let mut m = Complex64::new(1.0, 0.0);
        for sb in &self.sidebands {
            m += Complex64::from_polar(sb.amplitude, TWO_PI * sb.offset * t + sb.phase);
        }
        Complex64::from_polar(self.amplitude * g, TWO_PI * self.detuning_offset * t + self.phase) * m
    }
}

/// Sample a pulse on `t`. The time step must resolve the FWHM with at least
/// [`MIN_SAMPLES_PER_FWHM`] samples.
pub fn synthesize_pulse(spec: &PulseSpec, t: &[f64]) -> Result<Vec<Complex64>> {
    spec.check()?;
    if t.len() >= 2 {
        let dt = t[1] - t[0];
        if spec.fwhm < MIN_SAMPLES_PER_FWHM * dt * (1.0 - 1e-9) {
            return Err(GemError::Validation(format!(
                "pulse fwhm {} µs is below {MIN_SAMPLES_PER_FWHM} time steps of {dt} µs",
                spec.fwhm
            )));
        }
    }
    Ok(t.iter().map(|&x| spec.value_at(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::dominant_frequency;

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn plain_pulse_is_real_gaussian() {
        let t = times(401, 0.05);
        let p = PulseSpec {
            amplitude: 2.0,
            ..PulseSpec::gaussian(2.0, 10.0)
        };
        let e = synthesize_pulse(&p, &t).unwrap();
        assert!(e.iter().all(|v| v.im == 0.0));
        assert!((e[200].re - 2.0).abs() < 1e-15);
        let half = p.value_at(11.0).re;
        assert!((half - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_pi_negates() {
        let t = times(401, 0.05);
        let p0 = PulseSpec::gaussian(2.0, 10.0);
        let p1 = PulseSpec {
            phase: std::f64::consts::PI,
            ..p0.clone()
        };
        let a = synthesize_pulse(&p0, &t).unwrap();
        let b = synthesize_pulse(&p1, &t).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y).norm() < 1e-15);
        }
    }

    #[test]
    fn sidebands_give_three_spectral_peaks() {
        let dt = 0.02;
        let t = times(4000, dt);
        let p = PulseSpec {
            sidebands: vec![
                Sideband { offset: 0.7, amplitude: 1.0, phase: 0.0 },
                Sideband { offset: -0.7, amplitude: 1.0, phase: 0.0 },
            ],
            ..PulseSpec::gaussian(8.0, 40.0)
        };
        let e = synthesize_pulse(&p, &t).unwrap();
        let band = |lo: f64, hi: f64| crate::detection::band_energy(&e, dt, lo, hi);
        let total = band(-5.0, 5.0);
        for f in [-0.7, 0.0, 0.7] {
            assert!(band(f - 0.2, f + 0.2) > 0.3 * total);
        }
        // mixing up to a real beat, the strongest line sits on one of the components
        let beat: Vec<f64> = e
            .iter()
            .zip(&t)
            .map(|(v, &x)| (*v * Complex64::from_polar(1.0, TWO_PI * 3.0 * x)).re)
            .collect();
        let f = dominant_frequency(&beat, dt);
        assert!([2.3, 3.0, 3.7].iter().any(|c| (f - c).abs() < 0.02), "{f}");
    }

    #[test]
    fn unresolved_fwhm_rejected() {
        let t = times(100, 0.1);
        assert!(matches!(
            synthesize_pulse(&PulseSpec::gaussian(3.0, 5.0), &t),
            Err(GemError::Validation(_))
        ));
    }
}
