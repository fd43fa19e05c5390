//! Measurement chain: heterodyne beat synthesis, digital demodulation,
//! modulated-Gaussian fitting and fringe analysis.

mod demod;
mod energy;
mod fit;
mod fringe;
mod heterodyne;
mod lm;
mod spectrum;

pub use demod::{demodulate, lowpass_taps, Demodulated};
pub use energy::{efficiency, pulse_energy};
pub use fit::{fit_gaussian_envelope, fit_modulated_gaussian, fit_relative_phase, FitResult, Window};
pub use fringe::{fringe_analysis, FringeFit, FringeSeries};
pub use heterodyne::{beat_signal, heterodyne_trace, sinc_resample, DetectionConfig, HeterodyneTrace};
pub use lm::{levenberg_marquardt, nelder_mead, LmOutcome};
pub use spectrum::{band_energy, dominant_frequency, spectral_extent};
