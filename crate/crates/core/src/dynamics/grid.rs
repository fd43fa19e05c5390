use serde::{Deserialize, Serialize};

use crate::error::{GemError, Result};

/// Uniform space-time grid. Positions run from 0 to `length_l` inclusive;
/// times are `n * dt` for `n` in `0..n_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub n_z: usize,
    pub n_t: usize,
    pub length_l: f64,
    pub dt: f64,
}

pub const MIN_SPATIAL_POINTS: usize = 16;

impl SimulationGrid {
    pub fn new(n_z: usize, n_t: usize, length_l: f64, dt: f64) -> Result<Self> {
        let grid = SimulationGrid {
            n_z,
            n_t,
            length_l,
            dt,
        };
        grid.check()?;
        Ok(grid)
    }

    /// Grid covering `[0, duration]` with the given step.
    pub fn covering(n_z: usize, duration: f64, dt: f64) -> Result<Self> {
        if !(duration > 0.0 && dt > 0.0) {
            return Err(GemError::InvalidParameter(format!(
                "duration {duration} and dt {dt} must be positive"
            )));
        }
        let n_t = (duration / dt).ceil() as usize + 1;
        Self::new(n_z, n_t, 1.0, dt)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_z < MIN_SPATIAL_POINTS {
            return Err(GemError::InvalidParameter(format!(
                "n_z = {} is below the minimum of {MIN_SPATIAL_POINTS}",
                self.n_z
            )));
        }
        if self.n_t < 2 {
            return Err(GemError::InvalidParameter("n_t must be at least 2".into()));
        }
        if !(self.length_l.is_finite() && self.length_l > 0.0) {
            return Err(GemError::InvalidParameter("length_l must be positive".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(GemError::InvalidParameter("dt must be positive".into()));
        }
        Ok(())
    }

    pub fn dz(&self) -> f64 {
        self.length_l / (self.n_z - 1) as f64
    }

    /// Total simulated duration, `(n_t - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.n_t - 1) as f64 * self.dt
    }

    pub fn z(&self, j: usize) -> f64 {
        j as f64 * self.dz()
    }

    pub fn z_points(&self) -> Vec<f64> {
        (0..self.n_z).map(|j| self.z(j)).collect()
    }

    /// Positions normalised to the memory length, in `[0, 1]`.
    pub fn z_normalized(&self) -> Vec<f64> {
        (0..self.n_z)
            .map(|j| j as f64 / (self.n_z - 1) as f64)
            .collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t).map(|n| n as f64 * self.dt).collect()
    }

    /// Trapezoid quadrature weights along z (including `dz`).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dz = self.dz();
        let mut w = vec![dz; self.n_z];
        w[0] = 0.5 * dz;
        w[self.n_z - 1] = 0.5 * dz;
        w
    }
}
