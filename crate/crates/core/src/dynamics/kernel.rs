//! Exponential-time-differencing update of the atomic coherence.

use num_complex::Complex64;

use super::EnsembleParams;
use crate::error::{GemError, Result};
use crate::units::angular;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this `|x| = |(γ + iδ) dt|` the first-order ETD weight takes its
/// analytic limit `dt`.
const PHI1_LIMIT: f64 = 1e-6;
/// Below this the second-order weight switches to its Taylor series.
const PHI2_SERIES: f64 = 0.1;

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1_complex(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    // e^re (cos + i sin) - 1 = expm1(re) cos + (cos - 1) + i e^re sin
    Complex64::new(
        z.re.exp_m1() * c - 2.0 * half * half,
        z.re.exp() * s,
    )
}

/// Per-point ETD weights for one step of length `dt`.
///
/// With `a = γ_tot + iδ`, the exact solution of `σ' = -aσ + i g E(t)` for
/// `E` linear over the step is
/// `σ(dt) = decay σ + i g (phi1 E₀ + phi2 (E₁ - E₀))`, where
/// `decay = e^{-a dt}`, `phi1 = (1 - e^{-a dt}) / a` and
/// `phi2 = (a dt - 1 + e^{-a dt}) / (a² dt)`.
///
/// With a frame frequency `f`, the field is taken linear over the step in a
/// frame rotating at `f` instead: `E(s) e^{-2πi f s}` is linear. `decay` and
/// `phi1` then carry the factor `rot = e^{2πi f dt}`, and the correction uses
/// `end - rot * start`. `f = 0` is the plain scheme.
#[derive(Debug, Clone)]
pub struct EtdCoefficients {
    pub decay: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    pub phi2: Vec<Complex64>,
    pub rot: Complex64,
}

impl EtdCoefficients {
    pub fn new(delta_mhz: &[f64], gamma_total: f64, dt: f64) -> Self {
        Self::in_frame(delta_mhz, gamma_total, dt, 0.0)
    }

    pub fn in_frame(delta_mhz: &[f64], gamma_total: f64, dt: f64, frame_mhz: f64) -> Self {
        let n = delta_mhz.len();
        let rot = Complex64::from_polar(1.0, angular(frame_mhz) * dt);
        let mut decay = Vec::with_capacity(n);
        let mut phi1 = Vec::with_capacity(n);
        let mut phi2 = Vec::with_capacity(n);
        for &d in delta_mhz {
            let a = Complex64::new(gamma_total, angular(d + frame_mhz));
            let x = a * dt;
            let em1 = expm1_complex(-x); // e^{-x} - 1
            decay.push(em1 + 1.0);
            let ax = x.norm();
            if ax < PHI1_LIMIT {
                phi1.push(Complex64::new(dt, 0.0));
            } else {
                phi1.push(-em1 / a);
            }
            if ax < PHI2_SERIES {
                // (x - 1 + e^{-x}) / x² = Σ (-x)^k / (k + 2)!
                let mut term = Complex64::new(0.5, 0.0);
                let mut sum = term;
                for k in 1..9 {
                    term *= -x / (k as f64 + 2.0);
                    sum += term;
                }
                phi2.push(sum * dt);
            } else {
                phi2.push((x + em1) / (x * x) * dt);
            }
        }
        if frame_mhz != 0.0 {
            for (d, p) in decay.iter_mut().zip(phi1.iter_mut()) {
                *d *= rot;
                *p *= rot;
            }
        }
        EtdCoefficients { decay, phi1, phi2, rot }
    }

    pub fn len(&self) -> usize {
        self.decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay.is_empty()
    }

    /// First-order update in place, holding the field constant over the step.
    pub fn apply(&self, sigma: &mut [Complex64], field: &[Complex64], g_eff: f64) {
        let ig = I * g_eff;
        for j in 0..sigma.len() {
            sigma[j] = self.decay[j] * sigma[j] + ig * field[j] * self.phi1[j];
        }
    }

    /// Second-order correction for a field that moves from `start` to `end`
    /// linearly over the step. Adds to an `apply`-ed coherence.
    pub fn correct(
        &self,
        sigma: &mut [Complex64],
        start: &[Complex64],
        end: &[Complex64],
        g_eff: f64,
    ) {
        let ig = I * g_eff;
        for j in 0..sigma.len() {
            sigma[j] += ig * (end[j] - self.rot * start[j]) * self.phi2[j];
        }
    }
}

/// One coherence step with the field frozen over `dt`.
///
/// `σ ← e^{-(γ_tot + iδ)dt} σ + i g E (1 - e^{-(γ_tot + iδ)dt}) / (γ_tot + iδ)`,
/// with `γ_tot` including `scatter_extra` when `coupling_on`.
pub fn step_coherence(
    sigma: &[Complex64],
    field: &[Complex64],
    delta_mhz: &[f64],
    params: &EnsembleParams,
    dt: f64,
    coupling_on: bool,
) -> Result<Vec<Complex64>> {
    if sigma.len() != field.len() || sigma.len() != delta_mhz.len() {
        return Err(GemError::InvalidParameter(format!(
            "length mismatch: sigma {}, field {}, delta {}",
            sigma.len(),
            field.len(),
            delta_mhz.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GemError::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let finite = sigma.iter().chain(field).all(|c| c.re.is_finite() && c.im.is_finite())
        && delta_mhz.iter().all(|d| d.is_finite());
    if !finite {
        return Err(GemError::NumericalState("non-finite input to coherence step".into()));
    }
    let coeffs = EtdCoefficients::new(delta_mhz, params.gamma_total(coupling_on), dt);
    let mut out = sigma.to_vec();
    coeffs.apply(&mut out, field, params.g_eff);
    Ok(out)
}
