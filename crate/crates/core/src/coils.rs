//! Multi-element solenoid array: forward field model and current design.
//!
//! Positions are normalised to the cell length (`cell_length_m`, 0.2 m by
//! default) so the memory occupies `z ∈ [0, 1]`. Fields are on-axis only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{DetuningSchedule, DetuningSegment, SimulationGrid};
use crate::error::{GemError, Result};
use crate::units::{GAUSS_PER_TESLA, LANDE_GF_MHZ_PER_G, MU_0};

pub const DEFAULT_ELEMENTS: usize = 8;
pub const DEFAULT_CELL_LENGTH_M: f64 = 0.2;
/// 12.5 mm bore radius of a 25 mm diameter cell, in cell lengths.
pub const DEFAULT_RADIUS: f64 = 0.0125 / DEFAULT_CELL_LENGTH_M;
pub const DEFAULT_TURNS: u32 = 4;

/// One finite solenoid. `center_z`, `half_length` and `radius` are in units
/// of the cell length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolenoidElement {
    pub center_z: f64,
    pub half_length: f64,
    pub radius: f64,
    #[serde(default = "default_turns")]
    pub turns: u32,
    #[serde(default)]
    pub current: f64,
}

fn default_turns() -> u32 {
    DEFAULT_TURNS
}

impl SolenoidElement {
    /// On-axis field per ampere (G/A) at normalised position `z`.
    pub fn unit_field(&self, z: f64, cell_length_m: f64) -> f64 {
        let z1 = self.center_z - self.half_length;
        let z2 = self.center_z + self.half_length;
        let r = self.radius;
        let edge = |d: f64| d / (d * d + r * r).sqrt();
        let turns_per_m = self.turns as f64 / (2.0 * self.half_length * cell_length_m);
        0.5 * MU_0 * turns_per_m * GAUSS_PER_TESLA * (edge(z - z1) - edge(z - z2))
    }

    /// On-axis field (G) at normalised position `z`.
    pub fn field_on_axis(&self, z: f64, cell_length_m: f64) -> f64 {
        self.current * self.unit_field(z, cell_length_m)
    }

    fn check(&self) -> Result<()> {
        if !(self.half_length > 0.0 && self.radius > 0.0 && self.turns > 0) {
            return Err(GemError::InvalidParameter(format!(
                "solenoid at z={} needs positive half_length, radius and turns",
                self.center_z
            )));
        }
        if !self.center_z.is_finite() || !self.current.is_finite() {
            return Err(GemError::InvalidParameter("solenoid position and current must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilArray {
    pub elements: Vec<SolenoidElement>,
    #[serde(default = "default_gf")]
    pub lande_gf: f64,
    #[serde(default)]
    pub delta_o: f64,
    #[serde(default = "default_cell_length")]
    pub cell_length_m: f64,
}

fn default_gf() -> f64 {
    LANDE_GF_MHZ_PER_G
}

fn default_cell_length() -> f64 {
    DEFAULT_CELL_LENGTH_M
}

impl Default for CoilArray {
    /// Eight abutting four-turn coils spanning the cell.
    fn default() -> Self {
        let n = DEFAULT_ELEMENTS;
        let half = 0.5 / n as f64;
        CoilArray {
            elements: (0..n)
                .map(|k| SolenoidElement {
                    center_z: (k as f64 + 0.5) / n as f64,
                    half_length: half,
                    radius: DEFAULT_RADIUS,
                    turns: DEFAULT_TURNS,
                    current: 0.0,
                })
                .collect(),
            lande_gf: LANDE_GF_MHZ_PER_G,
            delta_o: 0.0,
            cell_length_m: DEFAULT_CELL_LENGTH_M,
        }
    }
}

impl CoilArray {
    pub fn check(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(GemError::InvalidParameter("coil array has no elements".into()));
        }
        for e in &self.elements {
            e.check()?;
        }
        for w in self.elements.windows(2) {
            if !(w[0].center_z < w[1].center_z) {
                return Err(GemError::InvalidParameter(
                    "coil elements must be ordered by strictly increasing center_z".into(),
                ));
            }
        }
        if !(self.cell_length_m > 0.0) || !self.lande_gf.is_finite() || !self.delta_o.is_finite() {
            return Err(GemError::InvalidParameter("invalid cell length, g_F or delta_o".into()));
        }
        Ok(())
    }

    pub fn currents(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.current).collect()
    }

    pub fn with_currents(&self, currents: &[f64]) -> Result<Self> {
        if currents.len() != self.elements.len() {
            return Err(GemError::InvalidParameter(format!(
                "{} currents given for {} coils",
                currents.len(),
                self.elements.len()
            )));
        }
        let mut out = self.clone();
        for (e, &i) in out.elements.iter_mut().zip(currents) {
            e.current = i;
        }
        Ok(out)
    }

    /// Unit-current response `A[j, i]` of element `i` at `z_grid[j]` (G/A).
    pub fn response_matrix(&self, z_grid: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(z_grid.len(), self.elements.len(), |j, i| {
            self.elements[i].unit_field(z_grid[j], self.cell_length_m)
        })
    }

    pub fn total_field(&self, z_grid: &[f64]) -> Vec<f64> {
        z_grid
            .iter()
            .map(|&z| {
                self.elements
                    .iter()
                    .map(|e| e.field_on_axis(z, self.cell_length_m))
                    .sum()
            })
            .collect()
    }

    /// `δ(z) = 2 g_F B_tot(z) − δ_o` in MHz.
    pub fn detuning_from_field(&self, z_grid: &[f64]) -> Vec<f64> {
        self.total_field(z_grid)
            .into_iter()
            .map(|b| 2.0 * self.lande_gf * b - self.delta_o)
            .collect()
    }

    pub fn default_ridge(&self, z_grid: &[f64]) -> f64 {
        let a = self.response_matrix(z_grid);
        1e-6 * a.norm_squared() / self.elements.len() as f64
    }
}

/// Result of [`solve_currents`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoilSolution {
    pub currents: Vec<f64>,
    /// Realised minus target detuning at each grid point (MHz).
    pub residual: Vec<f64>,
    /// RMS residual over the central region (MHz).
    pub rms_central: f64,
    /// `rms_central` divided by the target's span over the same region.
    pub rms_central_relative: f64,
    pub central_fraction: f64,
    pub ridge: f64,
    pub rank: usize,
    pub degenerate: bool,
}

impl CoilSolution {
    /// Regularised objective `‖A I − b‖² + ridge ‖I‖²` for arbitrary currents.
    pub fn objective(array: &CoilArray, target: &[f64], z_grid: &[f64], ridge: f64, currents: &[f64]) -> f64 {
        let a = array.response_matrix(z_grid);
        let b = field_target(array, target);
        let i = DVector::from_column_slice(currents);
        (a * &i - b).norm_squared() + ridge * i.norm_squared()
    }
}

fn field_target(array: &CoilArray, target: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        target.len(),
        target.iter().map(|d| (d + array.delta_o) / (2.0 * array.lande_gf)),
    )
}

fn in_central(z: f64, fraction: f64) -> bool {
    let margin = 0.5 * (1.0 - fraction);
    z >= margin - 1e-12 && z <= 1.0 - margin + 1e-12
}

/// Ridge-regularised least-squares currents realising `target` (MHz) on `z_grid`.
///
/// Solved through the SVD of the response matrix. With `ridge = 0` singular
/// values below `1e-12 · s_max` are dropped, giving the minimum-norm solution,
/// and `degenerate` is set when that happens.
pub fn solve_currents(
    array: &CoilArray,
    target: &[f64],
    z_grid: &[f64],
    ridge: f64,
    central_fraction: f64,
) -> Result<CoilSolution> {
    array.check()?;
    if target.len() != z_grid.len() || target.is_empty() {
        return Err(GemError::InvalidParameter("target and z grid must be non-empty and equal length".into()));
    }
    if target.iter().chain(z_grid).any(|v| !v.is_finite()) {
        return Err(GemError::InvalidParameter("target profile must be finite".into()));
    }
    if !(ridge >= 0.0) || !(central_fraction > 0.0 && central_fraction <= 1.0) {
        return Err(GemError::InvalidParameter("ridge must be >= 0 and central fraction in (0, 1]".into()));
    }
    let a = array.response_matrix(z_grid);
    let b = field_target(array, target);
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let s_max = svd.singular_values.max();
    let cutoff = 1e-12 * s_max;
    let mut currents = DVector::zeros(array.elements.len());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            rank += 1;
        } else if ridge == 0.0 {
            continue;
        }
        let coef = s / (s * s + ridge);
        if coef == 0.0 || !coef.is_finite() {
            continue;
        }
        let proj = u.column(k).dot(&b);
        currents += v_t.row(k).transpose() * (coef * proj);
    }
    let realised = &a * &currents;
    let residual: Vec<f64> = realised
        .iter()
        .zip(b.iter())
        .map(|(r, t)| 2.0 * array.lande_gf * (r - t))
        .collect();

    let mut sq = 0.0;
    let mut count = 0usize;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((&z, &r), &t) in z_grid.iter().zip(&residual).zip(target) {
        if in_central(z, central_fraction) {
            sq += r * r;
            count += 1;
            lo = lo.min(t);
            hi = hi.max(t);
        }
    }
    let rms_central = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
    let span = hi - lo;
    Ok(CoilSolution {
        currents: currents.iter().copied().collect(),
        residual,
        rms_central,
        rms_central_relative: if span > 0.0 { rms_central / span } else { rms_central },
        central_fraction,
        ridge,
        rank,
        degenerate: rank < array.elements.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub currents: Vec<f64>,
}

/// Time-stepped coil currents, one window per gradient setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentProgram {
    pub windows: Vec<CurrentWindow>,
}

/// One detuning segment per current window, evaluated on the grid's normalised positions.
pub fn program_to_schedule(
    program: &CurrentProgram,
    array: &CoilArray,
    grid: &SimulationGrid,
) -> Result<DetuningSchedule> {
    array.check()?;
    let z = grid.z_normalized();
    let mut segments = Vec::with_capacity(program.windows.len());
    for (k, w) in program.windows.iter().enumerate() {
        if w.currents.iter().any(|c| !c.is_finite()) {
            return Err(GemError::Validation(format!("current window {k} has non-finite currents")));
        }
        let profile = array.with_currents(&w.currents)?.detuning_from_field(&z);
        segments.push(DetuningSegment::new(w.t_start, w.t_end, profile));
    }
    if segments.is_empty() {
        return Err(GemError::Validation("current program has no windows".into()));
    }
    let schedule = DetuningSchedule::new(segments);
    schedule.validate(grid.duration(), grid.n_z)?;
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_current_gives_zero_field() {
        let arr = CoilArray::default();
        assert!(arr.total_field(&grid(33)).iter().all(|&b| b == 0.0));
        let d = CoilArray { delta_o: 0.3, ..arr }.detuning_from_field(&grid(5));
        assert!(d.iter().all(|&x| (x + 0.3).abs() < 1e-15));
    }

    #[test]
    fn long_solenoid_limit() {
        let e = SolenoidElement {
            center_z: 0.5,
            half_length: 2.0,
            radius: 0.1,
            turns: 400,
            current: 1.0,
        };
        let n = 400.0 / (4.0 * DEFAULT_CELL_LENGTH_M);
        let ideal = MU_0 * n * GAUSS_PER_TESLA;
        assert!((e.field_on_axis(0.5, DEFAULT_CELL_LENGTH_M) / ideal - 1.0).abs() < 0.01);
    }

    #[test]
    fn one_gauss_is_one_point_four_mhz() {
        let arr = CoilArray::default();
        let b = 1.0;
        assert!((2.0 * arr.lande_gf * b - arr.delta_o - 1.4).abs() < 1e-12);
    }

    #[test]
    fn forward_model_round_trip() {
        let arr = CoilArray::default();
        let truth = [0.3, -1.2, 0.8, 0.05, -0.4, 1.1, -0.7, 0.25];
        let z = grid(201);
        let target = arr.with_currents(&truth).unwrap().detuning_from_field(&z);
        let sol = solve_currents(&arr, &target, &z, 0.0, 0.8).unwrap();
        assert!(!sol.degenerate);
        for (a, b) in sol.currents.iter().zip(truth) {
            assert!((a - b).abs() / b.abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_target_with_ridge_gives_zero_currents() {
        let arr = CoilArray {
            delta_o: 0.5,
            ..CoilArray::default()
        };
        let z = grid(101);
        let target = vec![-0.5; z.len()];
        let ridge = arr.default_ridge(&z);
        let sol = solve_currents(&arr, &target, &z, ridge, 0.8).unwrap();
        assert!(sol.currents.iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn coincident_coils_are_flagged_degenerate() {
        let mut arr = CoilArray::default();
        arr.elements[1] = SolenoidElement {
            center_z: arr.elements[0].center_z + 1e-13,
            ..arr.elements[0].clone()
        };
        let z = grid(101);
        let target: Vec<f64> = z.iter().map(|&x| x - 0.5).collect();
        let sol = solve_currents(&arr, &target, &z, 0.0, 0.8).unwrap();
        assert!(sol.degenerate);
        assert!((sol.currents[0] - sol.currents[1]).abs() < 1e-6 * sol.currents[0].abs().max(1.0));
    }

    #[test]
    fn sign_flipped_program_mirrors_about_minus_delta_o() {
        let arr = CoilArray {
            delta_o: 0.2,
            ..CoilArray::default()
        };
        let g = SimulationGrid::new(33, 11, 1.0, 1.0).unwrap();
        let c = vec![0.1, 0.2, -0.3, 0.4, 0.0, -0.2, 0.6, 0.1];
        let neg: Vec<f64> = c.iter().map(|x| -x).collect();
        let program = CurrentProgram {
            windows: vec![
                CurrentWindow { t_start: 0.0, t_end: 5.0, currents: c },
                CurrentWindow { t_start: 5.0, t_end: 10.0, currents: neg },
            ],
        };
        let s = program_to_schedule(&program, &arr, &g).unwrap();
        for (a, b) in s.segments[0].profile.iter().zip(&s.segments[1].profile) {
            assert!(((a + 0.2) + (b + 0.2)).abs() < 1e-12);
        }
    }

    #[test]
    fn program_gap_is_rejected() {
        let arr = CoilArray::default();
        let g = SimulationGrid::new(33, 11, 1.0, 1.0).unwrap();
        let program = CurrentProgram {
            windows: vec![
                CurrentWindow { t_start: 0.0, t_end: 4.0, currents: vec![0.0; 8] },
                CurrentWindow { t_start: 5.0, t_end: 10.0, currents: vec![0.0; 8] },
            ],
        };
        assert!(matches!(program_to_schedule(&program, &arr, &g), Err(GemError::Validation(_))));
    }

    proptest! {
        #[test]
        fn total_field_is_linear(
            a in proptest::collection::vec(-2.0f64..2.0, 8),
            b in proptest::collection::vec(-2.0f64..2.0, 8),
        ) {
            let arr = CoilArray::default();
            let z = grid(41);
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let fa = arr.with_currents(&a).unwrap().total_field(&z);
            let fb = arr.with_currents(&b).unwrap().total_field(&z);
            let fs = arr.with_currents(&sum).unwrap().total_field(&z);
            let scale = fa.iter().chain(&fb).fold(1e-12f64, |m, v| m.max(v.abs()));
            for j in 0..z.len() {
                prop_assert!((fs[j] - fa[j] - fb[j]).abs() <= 1e-13 * scale);
            }
        }

        #[test]
        fn fringe_field_decays_monotonically(
            half in 0.01f64..0.5, radius in 0.01f64..0.5, a in 0.0f64..2.0,
        ) {
            let e = SolenoidElement { center_z: 0.0, half_length: half, radius, turns: 4, current: 1.0 };
            let b0 = e.field_on_axis(half + a, 0.2);
            let b1 = e.field_on_axis(half + a + 0.01, 0.2);
            prop_assert!(b1 <= b0);
            prop_assert!((e.field_on_axis(a, 0.2) - e.field_on_axis(-a, 0.2)).abs() < 1e-12 * e.field_on_axis(0.0, 0.2));
            prop_assert!(e.field_on_axis(1e6, 0.2).abs() < 1e-9);
        }

        #[test]
        fn solved_currents_are_locally_optimal(
            slope in 0.5f64..3.0, offset in -1.0f64..1.0, k in 0usize..8, up in proptest::bool::ANY,
        ) {
            let arr = CoilArray::default();
            let z = grid(81);
            let target: Vec<f64> = z.iter().map(|&x| offset + slope * (x - 0.5)).collect();
            let ridge = arr.default_ridge(&z);
            let sol = solve_currents(&arr, &target, &z, ridge, 0.8).unwrap();
            let best = CoilSolution::objective(&arr, &target, &z, ridge, &sol.currents);
            let mut p = sol.currents.clone();
            p[k] *= if up { 1.01 } else { 0.99 };
            let perturbed = CoilSolution::objective(&arr, &target, &z, ridge, &p);
            prop_assert!(perturbed >= best * (1.0 - 1e-12));
        }
    }
}
