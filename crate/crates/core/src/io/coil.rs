//! Coil geometry and target-profile files for the current solver.

use std::path::Path;

use serde::Serialize;

use super::bundle::write_atomic;
use super::file::{parse_table, path_error};
use crate::coils::{CoilArray, CoilSolution};
use crate::error::{GemError, Result};

pub const CURRENTS_FILE: &str = "currents.csv";
pub const RESIDUAL_FILE: &str = "residual.csv";
pub const COIL_REPORT_FILE: &str = "coil_report.json";

/// Parse a TOML coil geometry (the fields of [`CoilArray`]). An empty file
/// gives the default eight-coil array.
pub fn parse_coil_geometry(text: &str) -> Result<CoilArray> {
    let table = parse_table(text)?;
    if table.is_empty() {
        return Ok(CoilArray::default());
    }
    let array: CoilArray = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(path_error)?;
    array.check().map_err(|e| GemError::Semantic {
        key: "elements".into(),
        message: e.to_string(),
    })?;
    Ok(array)
}

/// Target detuning table with header `z,delta_mhz`; returns `(z, delta)`.
pub fn parse_target_profile(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| syntax_from_csv(&e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["z", "delta_mhz"] {
        return Err(GemError::Semantic {
            key: "header".into(),
            message: format!("expected columns z,delta_mhz, found {}", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let (mut z, mut d) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| syntax_from_csv(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| GemError::Syntax {
                    line,
                    column: i + 1,
                    message: format!("expected a finite number, found {:?}", rec.get(i).unwrap_or("")),
                })
        };
        z.push(field(0)?);
        d.push(field(1)?);
    }
    if z.is_empty() {
        return Err(GemError::Semantic {
            key: "rows".into(),
            message: "target profile has no rows".into(),
        });
    }
    Ok((z, d))
}

fn syntax_from_csv(e: &csv::Error) -> GemError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    GemError::Syntax {
        line,
        column: 0,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize)]
struct CoilReport<'a> {
    rms_central_mhz: f64,
    rms_central_relative: f64,
    central_fraction: f64,
    ridge: f64,
    rank: usize,
    degenerate: bool,
    warnings: &'a [String],
}

/// Findings worth reporting without failing the command.
pub fn coil_warnings(array: &CoilArray, sol: &CoilSolution) -> Vec<String> {
    let mut w = Vec::new();
    if sol.degenerate {
        w.push(format!(
            "response matrix has rank {} for {} coils; currents are the minimum-norm solution",
            sol.rank,
            array.elements.len()
        ));
    }
    w
}

/// Write the currents, per-point residual and summary of a coil solution.
pub fn write_coil_solution(
    dir: &Path,
    array: &CoilArray,
    z: &[f64],
    target: &[f64],
    sol: &CoilSolution,
    warnings: &[String],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let io = |e: csv::Error| GemError::Io(std::io::Error::other(e));
    let mut c = csv::Writer::from_writer(Vec::new());
    c.write_record(["element", "center_z", "current_a"]).map_err(io)?;
    for (k, (el, i)) in array.elements.iter().zip(&sol.currents).enumerate() {
        c.write_record([k.to_string(), el.center_z.to_string(), i.to_string()]).map_err(io)?;
    }
    let c = c.into_inner().map_err(|e| GemError::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(&dir.join(CURRENTS_FILE), &c)?;

    let mut r = csv::Writer::from_writer(Vec::new());
    r.write_record(["z", "target_mhz", "achieved_mhz", "residual_mhz"]).map_err(io)?;
    for ((zj, t), res) in z.iter().zip(target).zip(&sol.residual) {
        r.write_record([zj.to_string(), t.to_string(), (t + res).to_string(), res.to_string()])
            .map_err(io)?;
    }
    let r = r.into_inner().map_err(|e| GemError::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(&dir.join(RESIDUAL_FILE), &r)?;

    let report = CoilReport {
        rms_central_mhz: sol.rms_central,
        rms_central_relative: sol.rms_central_relative,
        central_fraction: sol.central_fraction,
        ridge: sol.ridge,
        rank: sol.rank,
        degenerate: sol.degenerate,
        warnings,
    };
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| GemError::Io(std::io::Error::other(e)))?;
    json.push(b'\n');
    write_atomic(&dir.join(COIL_REPORT_FILE), &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_geometry_is_default() {
        assert_eq!(parse_coil_geometry("").unwrap(), CoilArray::default());
    }

    #[test]
    fn geometry_unknown_key_is_named() {
        let text = "[[elements]]\ncenter_z = 0.5\nhalf_length = 0.5\nradius = 0.06\nturn = 3\n";
        match parse_coil_geometry(text).unwrap_err() {
            GemError::Semantic { key, .. } => assert!(key.ends_with("turn"), "{key}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn target_table_parses_and_rejects_junk() {
        let (z, d) = parse_target_profile("z,delta_mhz\n0,-1\n0.5,0\n1,1\n").unwrap();
        assert_eq!(z, vec![0.0, 0.5, 1.0]);
        assert_eq!(d, vec![-1.0, 0.0, 1.0]);
        match parse_target_profile("z,delta_mhz\n0,-1\n0.5,abc\n").unwrap_err() {
            GemError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 2)),
            other => panic!("{other}"),
        }
        assert!(parse_target_profile("x,y\n0,1\n").is_err());
    }
}
