use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GemError, Result};

/// Echo areas recorded against the relative input phase `Δθ`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FringeSeries {
    pub phases: Vec<f64>,
    pub areas: Vec<f64>,
}

/// Fit of `A(Δθ) = mean (1 + visibility cos(Δθ + phase_offset))`.
///
/// `phase_offset` is `None` when the fringe has no measurable contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub mean: f64,
    pub visibility: f64,
    pub phase_offset: Option<f64>,
}

const MIN_VISIBILITY: f64 = 1e-9;

/// Linear least squares of `c0 + c1 cos Δθ + c2 sin Δθ` on the series.
pub fn fringe_analysis(series: &FringeSeries) -> Result<FringeFit> {
    let n = series.phases.len();
    if n != series.areas.len() {
        return Err(GemError::InvalidParameter("phases and areas must have equal length".into()));
    }
    if n < 3 {
        return Err(GemError::InvalidParameter("fringe fit needs at least 3 points".into()));
    }
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => series.phases[i].cos(),
        _ => series.phases[i].sin(),
    });
    let b = DVector::from_column_slice(&series.areas);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() < 1e-9 * smax {
        return Err(GemError::InvalidParameter(
            "fringe phases do not determine a sinusoid (too few distinct values)".into(),
        ));
    }
    let c = svd
        .solve(&b, 1e-12 * smax)
        .map_err(|e| GemError::NumericalState(e.to_string()))?;
    let amp = c[1].hypot(c[2]);
    let visibility = if c[0] != 0.0 { amp / c[0].abs() } else { f64::INFINITY };
    let phase_offset = (amp > MIN_VISIBILITY * c[0].abs().max(f64::MIN_POSITIVE)).then(|| (-c[2]).atan2(c[1]));
    Ok(FringeFit {
        mean: c[0],
        visibility,
        phase_offset,
    })
}
