use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{drive_field_into, propagate_field_into, DetuningSchedule, EnsembleParams, EtdCoefficients, SimulationGrid};
use crate::error::{GemError, Result};
use crate::scenario::Scenario;

/// Growth factor of max|σ| over its running maximum, after the input has
/// ended, that is treated as a numerical blow-up.
const INSTABILITY_FACTOR: f64 = 10.0;
/// Weak-probe diagnostic threshold on `max |g E| dt`.
const WEAK_PROBE_LIMIT: f64 = 0.1;
/// Field re-evaluations per step. One pass leaves an energy error of either
/// sign; the second brings the step close to the implicit trapezoid rule.
const CORRECTOR_PASSES: usize = 2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Times at which to keep full σ(z) and E(z) slices (nearest step).
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub sigma: Vec<Complex64>,
    pub field: Vec<Complex64>,
}

/// Time series produced by a run, sampled on the grid times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub times: Vec<f64>,
    pub e_in: Vec<Complex64>,
    pub e_out: Vec<Complex64>,
    /// `N_exc(t) = (κ / g) ∫ |σ|² dz`, trapezoid in z.
    pub excitation: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_sigma: Vec<Complex64>,
    pub warnings: Vec<String>,
}

impl SimulationRecord {
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn input_energy(&self) -> f64 {
        trapezoid_energy(&self.e_in, self.dt())
    }

    pub fn output_energy(&self) -> f64 {
        trapezoid_energy(&self.e_out, self.dt())
    }
}

fn trapezoid_energy(e: &[Complex64], dt: f64) -> f64 {
    if e.len() < 2 {
        return 0.0;
    }
    let inner: f64 = e.iter().map(|v| v.norm_sqr()).sum();
    (inner - 0.5 * (e[0].norm_sqr() + e[e.len() - 1].norm_sqr())) * dt
}

/// A configured medium: grid, ensemble and detuning schedule.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub grid: &'a SimulationGrid,
    pub ensemble: &'a EnsembleParams,
    pub schedule: &'a DetuningSchedule,
}

impl<'a> Simulation<'a> {
    pub fn new(grid: &'a SimulationGrid, ensemble: &'a EnsembleParams, schedule: &'a DetuningSchedule) -> Self {
        Simulation {
            grid,
            ensemble,
            schedule,
        }
    }

    /// Integrate with `input[n]` the envelope entering at `z = 0` at grid time `n dt`.
    ///
    /// Each step advances σ with an ETD predictor (field frozen at the start
    /// of the step), then twice propagates the latest σ to get the end-of-step
    /// field and redoes the step with the ETD correction for a field varying
    /// linearly across it.
    pub fn run(&self, input: &[Complex64], opts: &RunOptions) -> Result<SimulationRecord> {
        self.grid.check()?;
        self.ensemble.check()?;
        let grid = self.grid;
        if input.len() != grid.n_t {
            return Err(GemError::InvalidParameter(format!(
                "input has {} samples, grid has n_t = {}",
                input.len(),
                grid.n_t
            )));
        }
        self.schedule.validate(grid.duration(), grid.n_z)?;

        let n_z = grid.n_z;
        let dt = grid.dt;
        let dz = grid.dz();
        let kappa = self.ensemble.kappa;
        let g = self.ensemble.g_eff;
        let weights = grid.trapezoid_weights();
        let exc_norm = if g > 0.0 { kappa / g } else { 0.0 };

        let peak_in = input.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let input_end = input
            .iter()
            .rposition(|v| v.norm() > 1e-12 * peak_in)
            .unwrap_or(0);

        let mut warnings = Vec::new();
        if g * peak_in * dt > WEAK_PROBE_LIMIT {
            warnings.push(format!(
                "weak-probe check: max|g E| dt = {:.3} exceeds {WEAK_PROBE_LIMIT}",
                g * peak_in * dt
            ));
        }

        let zero = Complex64::new(0.0, 0.0);
        let mut sigma = vec![zero; n_z];
        let mut next = vec![zero; n_z];
        let mut field = vec![zero; n_z];
        let mut predicted = vec![zero; n_z];
        let mut drive = vec![zero; n_z];
        let mut drive_end = vec![zero; n_z];

        let mut times = Vec::with_capacity(grid.n_t);
        let mut e_out = Vec::with_capacity(grid.n_t);
        let mut excitation = Vec::with_capacity(grid.n_t);
        let mut snapshots = Vec::new();
        let mut pending: Vec<(usize, f64)> = opts
            .snapshot_times
            .iter()
            .map(|&t| (((t / dt).round().max(0.0) as usize).min(grid.n_t - 1), t))
            .collect();
        pending.sort_by_key(|p| p.0);
        let mut pending = pending.into_iter().peekable();

        let mut cached: Option<((usize, bool), EtdCoefficients)> = None;
        let mut running_max = 0.0f64;

        for n in 0..grid.n_t {
            let t = n as f64 * dt;
            propagate_field_into(&sigma, input[n], kappa, dz, &mut field);
            times.push(t);
            e_out.push(field[n_z - 1]);
            excitation.push(
                exc_norm
                    * sigma
                        .iter()
                        .zip(&weights)
                        .map(|(s, w)| s.norm_sqr() * w)
                        .sum::<f64>(),
            );
            while let Some(&(idx, t_req)) = pending.peek() {
                if idx != n {
                    break;
                }
                snapshots.push(Snapshot {
                    t: t_req,
                    sigma: sigma.clone(),
                    field: field.clone(),
                });
                pending.next();
            }
            if n + 1 == grid.n_t {
                break;
            }

            let t_mid = t + 0.5 * dt;
            let Some(seg_idx) = self.schedule.segment_index_at(t_mid) else {
                // no schedule: inert medium, free propagation
                continue;
            };
            let coupling = self.schedule.coupling_at(t_mid);
            let key = (seg_idx, coupling);
            if cached.as_ref().map(|(k, _)| *k) != Some(key) {
                let seg = &self.schedule.segments[seg_idx];
                cached = Some((
                    key,
                    EtdCoefficients::in_frame(&seg.profile, self.ensemble.gamma_total(coupling), dt, seg.frame_mhz),
                ));
            }
            let coeffs = &cached.as_ref().expect("kernel cached above").1;

            drive_field_into(&field, &mut drive);
            next.copy_from_slice(&sigma);
            coeffs.apply(&mut next, &drive, g);
            for _ in 0..CORRECTOR_PASSES {
                propagate_field_into(&next, input[n + 1], kappa, dz, &mut predicted);
                drive_field_into(&predicted, &mut drive_end);
                next.copy_from_slice(&sigma);
                coeffs.apply(&mut next, &drive, g);
                coeffs.correct(&mut next, &drive, &drive_end, g);
            }
            std::mem::swap(&mut sigma, &mut next);

            let max_sigma = sigma.iter().map(|s| s.norm()).fold(0.0, f64::max);
            if !max_sigma.is_finite() {
                return Err(GemError::IntegrationFailure(format!(
                    "non-finite coherence at t = {:.4} µs",
                    t + dt
                )));
            }
            if n >= input_end && running_max > 0.0 && max_sigma > INSTABILITY_FACTOR * running_max {
                return Err(GemError::IntegrationFailure(format!(
                    "max|σ| = {max_sigma:.3e} at t = {:.4} µs exceeds {INSTABILITY_FACTOR}x its running maximum {running_max:.3e}",
                    t + dt
                )));
            }
            running_max = running_max.max(max_sigma);
        }

        Ok(SimulationRecord {
            times,
            e_in: input.to_vec(),
            e_out,
            excitation,
            snapshots,
            final_sigma: sigma,
            warnings,
        })
    }
}

/// Run a scenario with default options.
pub fn run_scenario(scenario: &Scenario) -> Result<SimulationRecord> {
    scenario.run(&RunOptions::default())
}

/// Discrete energy-balance residual for a lossless run:
/// `max_t |dN/dt - (|E(0,t)|² - |E(l,t)|²)|` normalised by the peak input flux.
///
/// The derivative is a forward difference between grid times and the flux
/// is averaged over the same interval.
pub fn excitation_balance(record: &SimulationRecord) -> f64 {
    let peak_flux = record.e_in.iter().map(|e| e.norm_sqr()).fold(0.0, f64::max);
    if peak_flux == 0.0 || record.times.len() < 2 {
        return 0.0;
    }
    let dt = record.dt();
    let flux = |n: usize| record.e_in[n].norm_sqr() - record.e_out[n].norm_sqr();
    (0..record.times.len() - 1)
        .map(|n| {
            let dn = (record.excitation[n + 1] - record.excitation[n]) / dt;
            (dn - 0.5 * (flux(n) + flux(n + 1))).abs()
        })
        .fold(0.0, f64::max)
        / peak_flux
}
