//! Unit conventions.
//!
//! Frequencies are stored as cyclic MHz and times as µs, so `TWO_PI * f * t`
//! is a phase in radians. All conversions to angular rates go through
//! [`angular`]; nothing else in the crate multiplies by 2π on a detuning.

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Landé factor of the storage ground state, MHz per Gauss.
pub const LANDE_GF_MHZ_PER_G: f64 = 0.7;

/// Vacuum permeability in T·m/A.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

pub const GAUSS_PER_TESLA: f64 = 1.0e4;

/// Cyclic MHz to angular rate in rad/µs.
#[inline]
pub fn angular(f_mhz: f64) -> f64 {
    TWO_PI * f_mhz
}

/// FWHM of `exp(-t²/(2s²))` in units of `s`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Amplitude-spectrum FWHM (MHz) of a Gaussian field envelope with amplitude FWHM `fwhm_us`.
pub fn gaussian_bandwidth(fwhm_us: f64) -> f64 {
    let s = fwhm_us / FWHM_PER_SIGMA;
    FWHM_PER_SIGMA / (TWO_PI * s)
}
