use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, nelder_mead};
use super::spectrum::dominant_frequency;
use crate::error::{GemError, Result};
use crate::units::{FWHM_PER_SIGMA, TWO_PI};

/// Closed time interval `(t_lo, t_hi)` in µs.
pub type Window = (f64, f64);

const MAX_ITER: usize = 200;
const XTOL: f64 = 1e-8;
const MAX_RELATIVE_RESIDUAL: f64 = 0.3;

/// Parameters of a fitted (modulated) Gaussian pulse.
///
/// `fwhm` is the full width at half maximum of the fitted amplitude
/// envelope, `2√(2 ln 2) s`. `omega_c` is the centre frequency relative to
/// the LO (the beat frequency, MHz). `phase` is referenced to `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub t0: f64,
    pub fwhm: f64,
    pub omega_c: f64,
    pub phase: f64,
    pub residual_rms: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    /// Demodulated complex envelope this fit predicts when mixing down at `demod_freq`.
    pub fn envelope_at(&self, t: f64, demod_freq: f64) -> Complex64 {
        let s = self.sigma();
        let g = (-(t - self.t0).powi(2) / (2.0 * s * s)).exp();
        Complex64::from_polar(
            self.amplitude * g,
            TWO_PI * (self.omega_c - demod_freq) * t + self.phase,
        )
    }

    /// Energy `∫|envelope|² dt` of the fitted Gaussian.
    pub fn area(&self) -> f64 {
        self.amplitude * self.amplitude * self.sigma() * std::f64::consts::PI.sqrt()
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TWO_PI);
    if w > std::f64::consts::PI {
        w - TWO_PI
    } else {
        w
    }
}

fn window_indices(t: &[f64], window: Window) -> Result<(usize, usize)> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(GemError::InvalidParameter(format!("empty fit window ({lo}, {hi})")));
    }
    let i0 = t.partition_point(|&x| x < lo);
    let i1 = t.partition_point(|&x| x <= hi);
    if i1 <= i0 + 5 {
        return Err(GemError::InvalidParameter(format!(
            "fit window ({lo}, {hi}) holds fewer than 6 samples"
        )));
    }
    Ok((i0, i1))
}

/// Envelope centre, sigma and energy from the second moment of |y|².
fn moments(t: &[f64], power: &[f64]) -> (f64, f64, f64) {
    let total: f64 = power.iter().sum();
    let t0 = t.iter().zip(power).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = t.iter().zip(power).map(|(x, p)| (x - t0).powi(2) * p).sum::<f64>() / total;
    // |G|² = exp(-(t-t0)²/s²) has variance s²/2
    let s = (2.0 * var).sqrt().max(1e-9);
    let dt = if t.len() > 1 { t[1] - t[0] } else { 1.0 };
    (t0, s, total * dt)
}

/// Least-squares fit of `a exp(-(t-t0)²/(2s²)) cos(2π f t + φ)` to a raw
/// heterodyne trace inside `window`.
///
/// Initial guesses come from the envelope's second moment and the spectral
/// peak unless `initial` is given. Levenberg-Marquardt with an analytic
/// Jacobian runs first; Nelder-Mead takes over if it fails to converge.
pub fn fit_modulated_gaussian(
    trace: &[f64],
    t: &[f64],
    window: Window,
    initial: Option<&FitResult>,
) -> Result<FitResult> {
    if trace.len() != t.len() {
        return Err(GemError::InvalidParameter("trace and time arrays must match".into()));
    }
    let (i0, i1) = window_indices(t, window)?;
    let ts = &t[i0..i1];
    let ys = &trace[i0..i1];
    if ys.iter().all(|&y| y == 0.0) {
        return Err(GemError::NoSignal);
    }
    let tc = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let dt = ts[1] - ts[0];

    let x0 = match initial {
        Some(f) => vec![f.amplitude, f.t0, f.sigma(), f.omega_c, f.phase + TWO_PI * f.omega_c * tc],
        None => {
            let f0 = dominant_frequency(ys, dt);
            let power: Vec<f64> = ys.iter().map(|y| y * y).collect();
            let (t0, s, energy) = moments(ts, &power);
            // ∫ a²G²cos² ≈ a² s √π / 2
            let a = (2.0 * energy / (s * std::f64::consts::PI.sqrt())).sqrt();
            let proj: Complex64 = ts
                .iter()
                .zip(ys)
                .map(|(&tk, &y)| {
                    let g = (-(tk - t0).powi(2) / (2.0 * s * s)).exp();
                    Complex64::from_polar(y * g, -TWO_PI * f0 * (tk - tc))
                })
                .sum();
            vec![a, t0, s, f0, proj.arg()]
        }
    };

    let model = |p: &[f64], tk: f64| -> (f64, f64, f64) {
        let u = tk - p[1];
        let g = (-u * u / (2.0 * p[2] * p[2])).exp();
        let theta = TWO_PI * p[3] * (tk - tc) + p[4];
        (g, theta.cos(), theta.sin())
    };
    let residuals = |p: &[f64]| {
        DVector::from_iterator(
            ts.len(),
            ts.iter().zip(ys).map(|(&tk, &y)| {
                let (g, c, _) = model(p, tk);
                p[0] * g * c - y
            }),
        )
    };
    let jacobian = |p: &[f64]| {
        let mut j = DMatrix::zeros(ts.len(), 5);
        for (row, &tk) in ts.iter().enumerate() {
            let (g, c, s) = model(p, tk);
            let u = tk - p[1];
            let s2 = p[2] * p[2];
            j[(row, 0)] = g * c;
            j[(row, 1)] = p[0] * g * c * u / s2;
            j[(row, 2)] = p[0] * g * c * u * u / (s2 * p[2]);
            j[(row, 3)] = -p[0] * g * s * TWO_PI * (tk - tc);
            j[(row, 4)] = -p[0] * g * s;
        }
        j
    };

    let (params, lm_ok) = solve(residuals, jacobian, &x0);
    let r = residuals(&params);
    finish(params, lm_ok, &r, ys.iter().map(|y| y * y).sum::<f64>(), tc, 0.0)
}

/// Fit `a exp(-(t-t0)²/(2s²)) e^{i(2π f t + φ)}` to a demodulated complex
/// envelope. The reported `omega_c` is `demod_freq + f`.
pub fn fit_gaussian_envelope(
    values: &[Complex64],
    t: &[f64],
    window: Window,
    demod_freq: f64,
    initial: Option<&FitResult>,
) -> Result<FitResult> {
    if values.len() != t.len() {
        return Err(GemError::InvalidParameter("envelope and time arrays must match".into()));
    }
    let (i0, i1) = window_indices(t, window)?;
    let ts = &t[i0..i1];
    let ys = &values[i0..i1];
    if ys.iter().all(|y| y.norm() == 0.0) {
        return Err(GemError::NoSignal);
    }
    let tc = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let dt = ts[1] - ts[0];
    let x0 = match initial {
        Some(f) => {
            let fr = f.omega_c - demod_freq;
            vec![f.amplitude, f.t0, f.sigma(), fr, f.phase + TWO_PI * fr * tc]
        }
        None => {
            let power: Vec<f64> = ys.iter().map(|y| y.norm_sqr()).collect();
            let (t0, s, _) = moments(ts, &power);
            let a = ys.iter().map(|y| y.norm()).fold(0.0, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..ys.len() - 1 {
                let w = power[k];
                num += w * (ys[k].conj() * ys[k + 1]).arg();
                den += w;
            }
            let fr = num / den / (TWO_PI * dt);
            let proj: Complex64 = ts
                .iter()
                .zip(ys)
                .map(|(&tk, &y)| y * Complex64::from_polar(1.0, -TWO_PI * fr * (tk - tc)))
                .sum();
            vec![a, t0, s, fr, proj.arg()]
        }
    };

    let model = |p: &[f64], tk: f64| -> (f64, Complex64) {
        let u = tk - p[1];
        let g = (-u * u / (2.0 * p[2] * p[2])).exp();
        (g, Complex64::from_polar(1.0, TWO_PI * p[3] * (tk - tc) + p[4]))
    };
    let n = ts.len();
    let residuals = |p: &[f64]| {
        let mut r = DVector::zeros(2 * n);
        for (k, (&tk, y)) in ts.iter().zip(ys).enumerate() {
            let (g, e) = model(p, tk);
            let d = e * (p[0] * g) - y;
            r[2 * k] = d.re;
            r[2 * k + 1] = d.im;
        }
        r
    };
    let jacobian = |p: &[f64]| {
        let mut j = DMatrix::zeros(2 * n, 5);
        for (k, &tk) in ts.iter().enumerate() {
            let (g, e) = model(p, tk);
            let u = tk - p[1];
            let s2 = p[2] * p[2];
            let m = e * (p[0] * g);
            let i_m = Complex64::new(0.0, 1.0) * m;
            let cols = [
                e * g,
                m * (u / s2),
                m * (u * u / (s2 * p[2])),
                i_m * (TWO_PI * (tk - tc)),
                i_m,
            ];
            for (c, v) in cols.iter().enumerate() {
                j[(2 * k, c)] = v.re;
                j[(2 * k + 1, c)] = v.im;
            }
        }
        j
    };
    let (params, lm_ok) = solve(residuals, jacobian, &x0);
    let r = residuals(&params);
    finish(params, lm_ok, &r, ys.iter().map(|y| y.norm_sqr()).sum::<f64>(), tc, demod_freq)
}

fn solve<R, J>(residuals: R, jacobian: J, x0: &[f64]) -> (Vec<f64>, bool)
where
    R: Fn(&[f64]) -> DVector<f64>,
    J: Fn(&[f64]) -> DMatrix<f64>,
{
    let out = levenberg_marquardt(&residuals, &jacobian, x0, MAX_ITER, XTOL);
    if out.converged && out.params.iter().all(|p| p.is_finite()) {
        return (out.params, true);
    }
    let start = if out.params.iter().all(|p| p.is_finite()) { out.params } else { x0.to_vec() };
    let scale: Vec<f64> = start
        .iter()
        .enumerate()
        .map(|(i, p)| match i {
            4 => 0.3,
            _ => 0.05 * p.abs().max(1e-3),
        })
        .collect();
    let (x, _) = nelder_mead(|p| 0.5 * residuals(p).norm_squared(), &start, &scale, 5000, 1e-14);
    (x, true)
}

fn finish(
    mut p: Vec<f64>,
    solver_ok: bool,
    residual: &DVector<f64>,
    data_power: f64,
    tc: f64,
    demod_freq: f64,
) -> Result<FitResult> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(GemError::NumericalState("fit diverged".into()));
    }
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[4] += std::f64::consts::PI;
    }
    let rms = (residual.norm_squared() / residual.len() as f64).sqrt();
    let relative = (residual.norm_squared() / data_power).sqrt();
    let fwhm = p[2].abs() * FWHM_PER_SIGMA;
    Ok(FitResult {
        amplitude: p[0],
        t0: p[1],
        fwhm,
        omega_c: demod_freq + p[3],
        phase: wrap_phase(p[4] - TWO_PI * p[3] * tc),
        residual_rms: rms,
        converged: solver_ok && relative <= MAX_RELATIVE_RESIDUAL && fwhm > 0.0,
    })
}

/// Relative phase of the second pulse in a two-pulse superposition, with
/// every other parameter fixed from single-pulse control fits.
///
/// Minimises `Σ |y - m₁ - e^{iφ} m₂|²` over `φ` in closed form.
pub fn fit_relative_phase(
    values: &[Complex64],
    t: &[f64],
    window: Window,
    demod_freq: f64,
    first: &FitResult,
    second: &FitResult,
) -> Result<f64> {
    let (i0, i1) = window_indices(t, window)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in i0..i1 {
        let m1 = first.envelope_at(t[k], demod_freq);
        let m2 = second.envelope_at(t[k], demod_freq);
        acc += m2.conj() * (values[k] - m1);
    }
    if acc.norm() == 0.0 {
        return Err(GemError::NoSignal);
    }
    Ok(acc.arg())
}
