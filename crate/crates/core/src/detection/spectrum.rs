use num_complex::Complex64;
use rustfft::FftPlanner;

fn spectrum(values: &[Complex64]) -> Vec<Complex64> {
    let n = (2 * values.len()).next_power_of_two().max(2);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..values.len()].copy_from_slice(values);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

/// Frequency (MHz) of FFT bin `k` of an `n`-point transform, mapped to `[-fs/2, fs/2)`.
///
/// The forward transform uses `e^{-2πikn/N}`, so a component `e^{+i2πνt}`
/// lands on positive bins.
fn bin_frequency(k: usize, n: usize, dt: f64) -> f64 {
    let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    kk / (n as f64 * dt)
}

/// Smallest `F` such that `|f| <= F` holds all but 10⁻⁴ of the envelope's energy.
///
/// The record is Hann-tapered first so truncation at its ends does not
/// register as broadband content.
pub fn spectral_extent(values: &[Complex64], dt: f64) -> f64 {
    let n = values.len();
    let taper = |k: usize| {
        let x = std::f64::consts::PI * k as f64 / (n.max(2) - 1) as f64;
        x.sin().powi(2)
    };
    let tapered: Vec<Complex64> = values.iter().enumerate().map(|(k, v)| v * taper(k)).collect();
    let spec = spectrum(&tapered);
    let n = spec.len();
    let mut bins: Vec<(f64, f64)> = spec
        .iter()
        .enumerate()
        .map(|(k, x)| (bin_frequency(k, n, dt).abs(), x.norm_sqr()))
        .collect();
    let total: f64 = bins.iter().map(|b| b.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (f, p) in bins {
        acc += p;
        if acc >= (1.0 - 1e-4) * total {
            return f;
        }
    }
    0.5 / dt
}

/// Energy `∫|E|²dt` carried by spectral components with `f_lo <= f < f_hi`.
pub fn band_energy(values: &[Complex64], dt: f64, f_lo: f64, f_hi: f64) -> f64 {
    let spec = spectrum(values);
    let n = spec.len();
    spec.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = bin_frequency(*k, n, dt);
            f >= f_lo && f < f_hi
        })
        .map(|(_, x)| x.norm_sqr())
        .sum::<f64>()
        * dt
        / n as f64
}

/// Peak frequency of a real trace (positive side), refined by a parabola
/// through the log-power of the three bins around the maximum.
pub fn dominant_frequency(trace: &[f64], dt: f64) -> f64 {
    let values: Vec<Complex64> = trace.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spec = spectrum(&values);
    let n = spec.len();
    let power: Vec<f64> = spec.iter().map(|x| x.norm_sqr()).collect();
    let (k, _) = power[1..n / 2]
        .iter()
        .enumerate()
        .fold((0usize, f64::MIN), |best, (i, &p)| if p > best.1 { (i + 1, p) } else { best });
    if k == 0 {
        return 0.0;
    }
    let (pm, p0, pp) = (power[k - 1], power[k], power[k + 1]);
    let mut shift = 0.0;
    if pm > 0.0 && p0 > 0.0 && pp > 0.0 {
        let (lm, l0, lp) = (pm.ln(), p0.ln(), pp.ln());
        let denom = lm - 2.0 * l0 + lp;
        if denom.abs() > 1e-300 {
            shift = (0.5 * (lm - lp) / denom).clamp(-0.5, 0.5);
        }
    }
    (k as f64 + shift) / (n as f64 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::TWO_PI;

    #[test]
    fn band_energy_obeys_parseval() {
        let dt = 0.02;
        let e: Vec<Complex64> = (0..500)
            .map(|k| {
                let t = k as f64 * dt;
                Complex64::from_polar((-(t - 5.0).powi(2)).exp(), TWO_PI * 0.8 * t)
            })
            .collect();
        let direct: f64 = e.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt;
        let all = band_energy(&e, dt, -1e9, 1e9);
        assert!((all - direct).abs() < 1e-12 * direct.max(1.0));
        let pos = band_energy(&e, dt, 0.0, 1e9);
        assert!(pos / all > 0.999);
    }

    #[test]
    fn dominant_frequency_of_gaussian_tone() {
        let dt = 0.01;
        let tr: Vec<f64> = (0..3000)
            .map(|k| {
                let t = k as f64 * dt;
                (-(t - 15.0).powi(2) / 8.0).exp() * (TWO_PI * 2.37 * t).cos()
            })
            .collect();
        assert!((dominant_frequency(&tr, dt) - 2.37).abs() < 0.01);
    }

    #[test]
    fn extent_of_constant_is_small() {
        let e = vec![Complex64::new(1.0, 0.0); 256];
        assert!(spectral_extent(&e, 0.05) < 1.0);
        assert_eq!(spectral_extent(&[Complex64::new(0.0, 0.0); 8], 0.1), 0.0);
    }
}
