use num_complex::Complex64;

use crate::error::{GemError, Result};

/// Trapezoid-rule pulse energy `∫|E|² dt` over uniformly spaced samples.
pub fn pulse_energy(values: &[Complex64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    dt * (inner - 0.5 * (values[0].norm_sqr() + values[n - 1].norm_sqr()))
}

/// Ratio of output to input energy.
pub fn efficiency(e_out: &[Complex64], e_in: &[Complex64], dt: f64) -> Result<f64> {
    let input = pulse_energy(e_in, dt);
    if input <= 0.0 {
        return Err(GemError::NoSignal);
    }
    Ok(pulse_energy(e_out, dt) / input)
}
