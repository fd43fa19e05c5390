//! Result files: time series, fit report, diagnostics and sweep tables.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ParsedScenario;
use crate::analysis::{analyze, interference_controls, relative_output_phase, RunAnalysis};
use crate::detection::{beat_signal, FitResult};
use crate::dynamics::{RunOptions, SimulationRecord};
use crate::error::{GemError, Result};
use crate::scenario::{Diagnostic, Scenario, WindowRole};

pub const TIME_SERIES_FILE: &str = "timeseries.csv";
pub const FIT_REPORT_FILE: &str = "fits.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const META_FILE: &str = "meta.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// Everything that varies between runs lives here, so every other file is
/// byte-identical for identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub version: String,
    pub protocol: String,
    pub wall_time_s: f64,
}

/// Fit report of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub config_hash: String,
    pub protocol: String,
    pub analysis: RunAnalysis,
    /// Single-pulse control fits of the echo window, for two-pulse interference.
    pub controls: Option<[FitResult; 2]>,
    /// Fitted relative phase of the interference echo (rad).
    pub relative_output_phase: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub meta: RunMeta,
    pub report: FitReport,
    pub diagnostics: Vec<Diagnostic>,
    pub record: SimulationRecord,
}

/// Run a parsed scenario and analyse it.
pub fn run_bundle(parsed: &ParsedScenario) -> Result<ResultBundle> {
    let started = Instant::now();
    let s = &parsed.scenario;
    let opts = RunOptions {
        snapshot_times: parsed.outputs().snapshot_times,
    };
    let record = s.run(&opts)?;
    let analysis = analyze(s, &record)?;
    let (controls, relative) = if s.meta.protocol == "interference-diff-freq" {
        let c = interference_controls(s, "E")?;
        let phase = relative_output_phase(s, &record, "E", &c)?;
        (Some([c.0, c.1]), Some(phase))
    } else {
        (None, None)
    };
    let report = FitReport {
        config_hash: parsed.config_hash.clone(),
        protocol: s.meta.protocol.clone(),
        analysis,
        controls,
        relative_output_phase: relative,
        warnings: record.warnings.clone(),
    };
    Ok(ResultBundle {
        meta: RunMeta {
            config_hash: parsed.config_hash.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            protocol: s.meta.protocol.clone(),
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        report,
        diagnostics: parsed.diagnostics.clone(),
        record,
    })
}

fn csv_error(e: csv::Error) -> GemError {
    GemError::Io(std::io::Error::other(e))
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Columns `t_us, re_Ein, im_Ein, re_Eout, im_Eout, heterodyne, Nexc`. The
/// heterodyne column is the noiseless beat of `E_out` at the grid times.
pub fn time_series_csv(s: &Scenario, rec: &SimulationRecord) -> Result<Vec<u8>> {
    let het = beat_signal(&rec.e_out, &rec.times, &s.detection);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t_us", "re_Ein", "im_Ein", "re_Eout", "im_Eout", "heterodyne", "Nexc"])
        .map_err(csv_error)?;
    for (k, h) in het.iter().enumerate() {
        w.write_record([
            num(rec.times[k]),
            num(rec.e_in[k].re),
            num(rec.e_in[k].im),
            num(rec.e_out[k].re),
            num(rec.e_out[k].im),
            num(*h),
            num(rec.excitation[k]),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| GemError::Io(std::io::Error::other(e.to_string())))
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| GemError::Io(std::io::Error::other(e)))?;
    out.push(b'\n');
    Ok(out)
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write all files of a run into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, parsed: &ParsedScenario, bundle: &ResultBundle) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(SCENARIO_FILE), parsed.canonical.as_bytes())?;
    if parsed.outputs().time_series {
        write_atomic(&dir.join(TIME_SERIES_FILE), &time_series_csv(&parsed.scenario, &bundle.record)?)?;
    }
    write_atomic(&dir.join(FIT_REPORT_FILE), &json(&bundle.report)?)?;
    write_atomic(&dir.join(DIAGNOSTICS_FILE), &json(&bundle.diagnostics)?)?;
    write_atomic(&dir.join(META_FILE), &json(&bundle.meta)?)?;
    Ok(())
}

/// Write only the diagnostics of a scenario (used by `validate`).
pub fn write_diagnostics(dir: &Path, parsed: &ParsedScenario) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join(SCENARIO_FILE), parsed.canonical.as_bytes())?;
    write_atomic(&dir.join(DIAGNOSTICS_FILE), &json(&parsed.diagnostics)?)
}

const WINDOW_COLUMNS: [&str; 7] = ["omega_c", "delta_omega_c", "fwhm", "w_ratio", "phase", "area", "peak_time"];

/// Per-point summary for the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub value: f64,
    pub report: FitReport,
}

fn window_labels(rows: &[AggregateRow]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for r in rows {
        for w in &r.report.analysis.windows {
            if !labels.contains(&w.label) {
                labels.push(w.label.clone());
            }
        }
    }
    labels
}

/// Sweep table: one row per value with efficiency, energies, the fitted
/// relative output phase, and per window the fitted centre frequency,
/// its shift from the first input window, FWHM, FWHM over the input FWHM,
/// phase, window energy and peak time. Missing values are empty.
pub fn aggregate_csv(key: &str, rows: &[AggregateRow]) -> Result<Vec<u8>> {
    let labels = window_labels(rows);
    let mut header = vec![
        key.to_string(),
        "efficiency".into(),
        "input_energy".into(),
        "output_energy".into(),
        "excitation_balance".into(),
        "dtheta_op".into(),
    ];
    for l in &labels {
        for c in WINDOW_COLUMNS {
            header.push(format!("{l}_{c}"));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_error)?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in rows {
        let a = &r.report.analysis;
        let reference = a
            .windows
            .iter()
            .find(|w| w.role == WindowRole::Input)
            .and_then(|w| w.fit.as_ref());
        let mut rec = vec![
            num(r.value),
            num(a.efficiency),
            num(a.input_energy),
            num(a.output_energy),
            num(a.excitation_balance),
            opt(r.report.relative_output_phase),
        ];
        for l in &labels {
            let win = a.window(l);
            let fit = win.and_then(|w| w.fit.as_ref());
            rec.push(opt(fit.map(|f| f.omega_c)));
            rec.push(opt(fit.zip(reference).map(|(f, p)| f.omega_c - p.omega_c)));
            rec.push(opt(fit.map(|f| f.fwhm)));
            rec.push(opt(fit.zip(reference).map(|(f, p)| f.fwhm / p.fwhm)));
            rec.push(opt(fit.map(|f| f.phase)));
            rec.push(opt(win.map(|w| w.energy)));
            rec.push(opt(win.map(|w| w.peak_time)));
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| GemError::Io(std::io::Error::other(e.to_string())))
}
