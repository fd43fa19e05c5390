use serde::{Deserialize, Serialize};

use crate::error::{GemError, Result};
use crate::units::{angular, TWO_PI};

/// Rates and couplings of the effective two-level ensemble.
///
/// `gamma`, `gamma0` and `scatter_extra` are decay rates in µs⁻¹ (applied to
/// the coherence amplitude). `kappa` is the field-equation source strength
/// `gN/c` per unit length and `g_eff` the field-to-coherence rate; only their
/// product affects the propagated light, while `kappa / g_eff` normalises the
/// stored excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub gamma: f64,
    pub gamma0: f64,
    pub scatter_extra: f64,
    pub kappa: f64,
    pub g_eff: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            gamma: 0.0,
            gamma0: 0.0,
            scatter_extra: 0.0,
            kappa: 1.0,
            g_eff: 1.0,
        }
    }
}

impl EnsembleParams {
    /// Ensemble whose effective optical depth is `beta` for a linear gradient
    /// spanning `bandwidth_mhz` over `length_l`.
    ///
    /// Each spectral component crossing its resonance sees an amplitude
    /// transmission `exp(-π β)` with `β = g κ l / (2π B)`.
    pub fn with_optical_depth(beta: f64, bandwidth_mhz: f64, g_eff: f64, length_l: f64) -> Self {
        let kappa = beta * angular(bandwidth_mhz.abs()) / (g_eff * length_l);
        EnsembleParams {
            kappa,
            g_eff,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let rates = [
            ("gamma", self.gamma),
            ("gamma0", self.gamma0),
            ("scatter_extra", self.scatter_extra),
            ("kappa", self.kappa),
            ("g_eff", self.g_eff),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GemError::InvalidParameter(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Total coherence decay rate, with the coupling-induced scattering
    /// included only while the coupling field is on.
    pub fn gamma_total(&self, coupling_on: bool) -> f64 {
        let extra = if coupling_on { self.scatter_extra } else { 0.0 };
        self.gamma + self.gamma0 + extra
    }

    /// Effective optical depth for a segment spanning `bandwidth_mhz` over
    /// `length_l`. Infinite for a flat profile.
    pub fn optical_depth(&self, bandwidth_mhz: f64, length_l: f64) -> f64 {
        self.g_eff * self.kappa * length_l / angular(bandwidth_mhz.abs())
    }
}

/// Parameters of the three-level (Λ) system before reduction.
///
/// Frequencies (`rabi_coupling`, `detuning_one_photon`) are cyclic MHz;
/// `gamma_excited` is an angular rate in µs⁻¹. The validity inequalities are
/// evaluated with the one-photon detuning converted to rad/µs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaParams {
    pub g_bare: f64,
    pub rabi_coupling: f64,
    pub detuning_one_photon: f64,
    pub optical_depth_d: f64,
    pub timescale_t: f64,
    pub gamma_excited: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaReduction {
    pub g_eff: f64,
    /// `|Δ| > 10 d γ`
    pub detuning_condition: bool,
    /// `d T γ > 10`
    pub timescale_condition: bool,
}

impl LambdaReduction {
    pub fn valid(&self) -> bool {
        self.detuning_condition && self.timescale_condition
    }
}

/// Reduce a far-detuned Λ system to an equivalent two-level coupling
/// `g' = g Ω_c / Δ`. The validity conditions are reported, never enforced.
pub fn effective_two_level(p: &LambdaParams) -> Result<LambdaReduction> {
    if p.detuning_one_photon == 0.0 || !p.detuning_one_photon.is_finite() {
        return Err(GemError::InvalidParameter(
            "one-photon detuning must be non-zero".into(),
        ));
    }
    let g_eff = (p.g_bare * p.rabi_coupling / p.detuning_one_photon).abs();
    let d_gamma = p.optical_depth_d * p.gamma_excited;
    Ok(LambdaReduction {
        g_eff,
        detuning_condition: TWO_PI * p.detuning_one_photon.abs() > 10.0 * d_gamma,
        timescale_condition: d_gamma * p.timescale_t > 10.0,
    })
}
