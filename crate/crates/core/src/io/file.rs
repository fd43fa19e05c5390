//! Scenario files.
//!
//! A scenario file is TOML. It either names a preset under `[protocol]`, or
//! describes the medium explicitly with `[grid]`, `[ensemble]`, `[[pulses]]`
//! and exactly one of `[schedule.ideal]` / `[schedule.currents]`.
//! `[detection]` and `[outputs]` are accepted in both forms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coils::{program_to_schedule, CoilArray, CurrentProgram};
use crate::detection::DetectionConfig;
use crate::dynamics::{effective_two_level, EnsembleParams, LambdaParams, SimulationGrid};
use crate::error::{GemError, Result};
use crate::scenario::{
    preset_scenario, schedule_from_events, AnalysisWindow, Diagnostic, PresetKind, PresetParams,
    PulseSpec, RegionFlipEvent, Scenario, ScenarioMeta, Severity, WindowRole,
};

/// Value of the `units` header key. Files may omit it; any other value is rejected.
pub const UNITS: &str = "time=us frequency=MHz field=G current=A position=z/l";

fn default_units() -> String {
    UNITS.to_string()
}

fn default_n_z() -> usize {
    512
}

fn default_length() -> f64 {
    1.0
}

fn default_g() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coils: Option<CoilArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pulses: Vec<PulseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub preset: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n_z")]
    pub n_z: usize,
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "default_length")]
    pub length_l: f64,
}

/// Give either `kappa` or `beta`. `beta` is the optical depth for the
/// detuning span of the first schedule segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default)]
    pub scatter_extra: f64,
    #[serde(default = "default_g")]
    pub g_eff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// Three-level parameters; when present they set `g_eff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub g_bare: f64,
    pub rabi_coupling: f64,
    pub detuning_one_photon: f64,
    pub optical_depth_d: f64,
    pub timescale_t: f64,
    pub gamma_excited: f64,
}

impl From<&LambdaSection> for LambdaParams {
    fn from(l: &LambdaSection) -> Self {
        LambdaParams {
            g_bare: l.g_bare,
            rabi_coupling: l.rabi_coupling,
            detuning_one_photon: l.detuning_one_photon,
            optical_depth_d: l.optical_depth_d,
            timescale_t: l.timescale_t,
            gamma_excited: l.gamma_excited,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal: Option<IdealSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currents: Option<CurrentProgram>,
    /// Windows with the coupling field on; the whole run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_on: Option<Vec<(f64, f64)>>,
}

/// Linear initial profile `offset + slope (z - 1/2)` and region events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealSchedule {
    pub slope: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub events: Vec<RegionFlipEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub label: String,
    pub role: WindowRole,
    pub center: f64,
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<f64>,
}

impl From<&WindowSpec> for AnalysisWindow {
    fn from(w: &WindowSpec) -> Self {
        AnalysisWindow {
            label: w.label.clone(),
            role: w.role,
            t_lo: w.center - w.half_width,
            t_hi: w.center + w.half_width,
            center: Some(w.center),
            freq: w.freq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Analysis windows added to those a preset defines.
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub time_series: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            windows: Vec::new(),
            snapshot_times: Vec::new(),
            time_series: true,
        }
    }
}

/// A scenario file after parsing, with its canonical text and hash.
#[derive(Debug, Clone)]
pub struct ParsedScenario {
    pub scenario: Scenario,
    pub file: ScenarioFile,
    pub canonical: String,
    pub config_hash: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedScenario {
    pub fn outputs(&self) -> OutputsSection {
        self.file.outputs.clone().unwrap_or_default()
    }

    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.is_error())
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parse TOML text into a raw table, reporting syntax errors by line and column.
pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        GemError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

fn semantic(key: impl Into<String>, message: impl Into<String>) -> GemError {
    GemError::Semantic {
        key: key.into(),
        message: message.into(),
    }
}

/// Map a deserialisation error to a semantic error naming the dotted key path.
pub(crate) fn path_error(e: serde_path_to_error::Error<toml::de::Error>) -> GemError {
    let path = e.path().to_string();
    let message = e.into_inner().message().to_string();
    // unknown fields may be reported at their parent; append the field name
    let key = match message.strip_prefix("unknown field `").and_then(|m| m.split('`').next()) {
        Some(field) if path == "." => field.to_string(),
        Some(field) if !path.ends_with(field) => format!("{path}.{field}"),
        _ => path,
    };
    semantic(key, message)
}

/// Typed view of a raw table. Errors name the dotted path of the offending key.
pub fn file_from_table(table: toml::Table) -> Result<ScenarioFile> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(path_error)
}

/// Split `a.b.0.c` into table keys and array indices.
fn path_parts(key: &str) -> Vec<&str> {
    key.split('.').collect()
}

fn parse_value(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match raw {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(raw.to_string()),
    }
}

/// Resolve a bare key (no dots) against a protocol file to `protocol.params.KEY`.
pub fn qualify_key(table: &toml::Table, key: &str) -> String {
    if !key.contains('.') && table.contains_key("protocol") && !table.contains_key(key) {
        format!("protocol.params.{key}")
    } else {
        key.to_string()
    }
}

fn index_into<'a>(a: &'a mut [toml::Value], part: &str, key: &str) -> Result<&'a mut toml::Value> {
    let i: usize = part
        .parse()
        .map_err(|_| semantic(key, format!("`{part}` is not an array index")))?;
    let n = a.len();
    a.get_mut(i)
        .ok_or_else(|| semantic(key, format!("index {i} out of range ({n} entries)")))
}

/// The value at a dotted path, created (as a float) if missing. Also
/// reports whether it existed.
fn slot<'a>(table: &'a mut toml::Table, key: &str) -> Result<(&'a mut toml::Value, bool)> {
    let parts = path_parts(key);
    let (last, parents) = parts.split_last().expect("split never yields nothing");
    let mut cur = table;
    let mut parents = parents.iter();
    while let Some(part) = parents.next() {
        let mut v = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        // descend through array indices until the next table
        loop {
            match v {
                toml::Value::Array(a) => {
                    let Some(idx) = parents.next() else {
                        let v = index_into(a, last, key)?;
                        return Ok((v, true));
                    };
                    v = index_into(a, idx, key)?;
                }
                toml::Value::Table(_) => break,
                _ => return Err(semantic(key, format!("`{part}` is not a table"))),
            }
        }
        let toml::Value::Table(t) = v else { unreachable!("loop exits on tables only") };
        cur = t;
    }
    let existed = cur.contains_key(*last);
    Ok((cur.entry(last.to_string()).or_insert(toml::Value::Float(0.0)), existed))
}

/// Apply a `key=value` override to a raw table. Bare keys in a protocol
/// file address preset parameters.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| semantic(assignment, "override must look like key=value"))?;
    let key = qualify_key(table, key.trim());
    let value = parse_value(raw.trim());
    let (v, _) = slot(table, &key)?;
    *v = value;
    Ok(())
}

/// Set a numeric field for a sweep. The key must address a number, or a
/// preset parameter (which may be absent and take its default).
pub fn set_numeric(table: &mut toml::Table, key: &str, value: f64) -> Result<()> {
    let key = qualify_key(table, key);
    let is_param = key.starts_with("protocol.params.");
    let (v, existed) = slot(table, &key)?;
    match v {
        toml::Value::Integer(_) if existed => {
            if value.fract() != 0.0 {
                return Err(semantic(key, format!("integer field cannot take {value}")));
            }
            *v = toml::Value::Integer(value as i64);
        }
        toml::Value::Float(_) if existed || is_param => *v = toml::Value::Float(value),
        _ if !existed => {
            return Err(semantic(key, "not a numeric field of this scenario"));
        }
        other => {
            return Err(semantic(key.clone(), format!("not numeric (holds {})", other.type_str())));
        }
    }
    Ok(())
}

fn check_units(file: &ScenarioFile) -> Result<()> {
    if file.units != UNITS {
        return Err(semantic("units", format!("expected \"{UNITS}\"")));
    }
    Ok(())
}

fn detuning_span(profile: &[f64]) -> f64 {
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Build the scenario a file describes and the fully-defaulted file that
/// reproduces it.
pub fn build_scenario(file: &ScenarioFile) -> Result<(Scenario, ScenarioFile, Vec<Diagnostic>)> {
    check_units(file)?;
    let mut notes = Vec::new();
    let ideal = file.schedule.as_ref().and_then(|s| s.ideal.as_ref());
    let currents = file.schedule.as_ref().and_then(|s| s.currents.as_ref());
    let sources = [file.protocol.is_some(), ideal.is_some(), currents.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if sources != 1 {
        return Err(semantic(
            "schedule",
            format!("exactly one of protocol, schedule.ideal, schedule.currents must be given, found {sources}"),
        ));
    }

    let mut canonical = file.clone();
    let mut scenario = if let Some(p) = &file.protocol {
        for (present, key) in [
            (file.grid.is_some(), "grid"),
            (file.ensemble.is_some(), "ensemble"),
            (file.lambda.is_some(), "lambda"),
            (file.coils.is_some(), "coils"),
            (file.schedule.is_some(), "schedule"),
            (!file.pulses.is_empty(), "pulses"),
        ] {
            if present {
                return Err(semantic(key, "set by the protocol preset; change it through protocol.params"));
            }
        }
        let kind: PresetKind = p.preset.parse().map_err(|e: GemError| match e {
            GemError::Semantic { message, .. } => semantic("protocol.preset", message),
            other => other,
        })?;
        let mut params = PresetParams::new();
        for (k, v) in &p.params {
            params = params.with(k, *v);
        }
        let resolved = params.resolve(kind)?;
        canonical.protocol = Some(ProtocolSection {
            preset: kind.name().to_string(),
            params: resolved,
        });
        preset_scenario(kind, &params)?
    } else {
        let g = file.grid.as_ref().ok_or_else(|| semantic("grid", "required without a protocol"))?;
        let ens = file
            .ensemble
            .as_ref()
            .ok_or_else(|| semantic("ensemble", "required without a protocol"))?;
        if file.pulses.is_empty() {
            return Err(semantic("pulses", "at least one pulse is required without a protocol"));
        }
        if !(g.duration > 0.0 && g.dt > 0.0) {
            return Err(semantic("grid", "dt and duration must be positive"));
        }
        let n_t = (g.duration / g.dt).ceil() as usize + 1;
        let grid = SimulationGrid::new(g.n_z, n_t, g.length_l, g.dt).map_err(|e| semantic("grid", e.to_string()))?;
        let z = grid.z_normalized();

        let mut schedule = if let Some(ideal) = ideal {
            let initial = z.iter().map(|x| ideal.offset + ideal.slope * (x - 0.5)).collect();
            for (i, e) in ideal.events.iter().enumerate() {
                e.check().map_err(|err| semantic(format!("schedule.ideal.events.{i}"), err.to_string()))?;
            }
            schedule_from_events(initial, &ideal.events, grid.duration(), &z)?
        } else {
            let program = currents.expect("one source is present");
            let array = file.coils.clone().unwrap_or_default();
            canonical.coils = Some(array.clone());
            program_to_schedule(program, &array, &grid).map_err(|e| semantic("schedule.currents", e.to_string()))?
        };
        let coupling = file
            .schedule
            .as_ref()
            .and_then(|s| s.coupling_on.clone())
            .unwrap_or_else(|| vec![(0.0, grid.duration())]);
        schedule = schedule.with_coupling(coupling);

        let mut g_eff = ens.g_eff;
        if let Some(l) = &file.lambda {
            let red = effective_two_level(&LambdaParams::from(l)).map_err(|e| semantic("lambda", e.to_string()))?;
            g_eff = red.g_eff;
            if !red.valid() {
                notes.push(Diagnostic {
                    severity: Severity::Warning,
                    code: "lambda".into(),
                    message: format!(
                        "two-level reduction outside its validity range (detuning condition {}, timescale condition {})",
                        red.detuning_condition, red.timescale_condition
                    ),
                });
            }
        }
        let kappa = match (ens.kappa, ens.beta) {
            (Some(k), None) => k,
            (None, Some(beta)) => {
                let span = detuning_span(&schedule.segments[0].profile);
                if !(span > 0.0) {
                    return Err(semantic("ensemble.beta", "first schedule segment has no detuning span; give kappa"));
                }
                EnsembleParams::with_optical_depth(beta, span, g_eff, grid.length_l).kappa
            }
            _ => return Err(semantic("ensemble", "give exactly one of kappa and beta")),
        };
        let ensemble = EnsembleParams {
            gamma: ens.gamma,
            gamma0: ens.gamma0,
            scatter_extra: ens.scatter_extra,
            kappa,
            g_eff,
        };
        ensemble.check().map_err(|e| semantic("ensemble", e.to_string()))?;
        canonical.ensemble = Some(EnsembleSection {
            kappa: Some(kappa),
            beta: None,
            g_eff: ens.g_eff,
            ..ens.clone()
        });
        let protocol = if ideal.is_some() { "ideal" } else { "currents" };
        Scenario {
            grid,
            ensemble,
            pulses: file.pulses.clone(),
            schedule,
            detection: DetectionConfig::default(),
            meta: ScenarioMeta {
                protocol: protocol.into(),
                pulse_regions: vec![(0.0, 1.0); file.pulses.len()],
                events: ideal.map(|i| i.events.clone()).unwrap_or_default(),
                ..Default::default()
            },
        }
    };

    let detection = file.detection.clone().unwrap_or_default();
    detection.check().map_err(|e| semantic("detection", e.to_string()))?;
    scenario.detection = detection.clone();
    canonical.detection = Some(detection);

    let outputs = file.outputs.clone().unwrap_or_default();
    for (i, w) in outputs.windows.iter().enumerate() {
        if scenario.window(&w.label).is_some() {
            return Err(semantic(format!("outputs.windows.{i}.label"), format!("window '{}' already defined", w.label)));
        }
        scenario.meta.windows.push(w.into());
    }
    canonical.outputs = Some(outputs);
    canonical.units = UNITS.to_string();
    Ok((scenario, canonical, notes))
}

/// Canonical TOML text of a fully-defaulted file.
pub fn canonical_text(file: &ScenarioFile) -> Result<String> {
    toml::to_string(file).map_err(|e| GemError::InvalidParameter(format!("cannot serialise scenario: {e}")))
}

/// Hex SHA-256 of the canonical text.
pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parse an already-overridden table into a validated scenario.
pub fn parse_scenario_table(table: toml::Table) -> Result<ParsedScenario> {
    let file = file_from_table(table)?;
    let (scenario, canonical_file, mut diagnostics) = build_scenario(&file)?;
    let canonical = canonical_text(&canonical_file)?;
    diagnostics.extend(scenario.diagnostics());
    Ok(ParsedScenario {
        config_hash: config_hash(&canonical),
        scenario,
        file: canonical_file,
        canonical,
        diagnostics,
    })
}

/// Parse scenario text, apply `key=value` overrides, build and validate.
pub fn parse_scenario_with(text: &str, overrides: &[String]) -> Result<ParsedScenario> {
    let mut table = parse_table(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    parse_scenario_table(table)
}

pub fn parse_scenario(text: &str) -> Result<ParsedScenario> {
    parse_scenario_with(text, &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[protocol]\npreset = \"basic-echo\"\n";

    #[test]
    fn minimal_protocol_file_gets_defaults() {
        let p = parse_scenario(MINIMAL).unwrap();
        let direct = preset_scenario(PresetKind::BasicEcho, &PresetParams::new()).unwrap();
        assert_eq!(p.scenario, direct);
        let params = &p.file.protocol.as_ref().unwrap().params;
        assert_eq!(params["beta"], 2.0);
        assert_eq!(params["bw_ratio"], 4.0);
        assert!(p.canonical.contains("samples_per_fwhm"));
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let p = parse_scenario(MINIMAL).unwrap();
        let again = parse_scenario(&p.canonical).unwrap();
        assert_eq!(again.canonical, p.canonical);
        assert_eq!(again.config_hash, p.config_hash);
        assert_eq!(again.scenario, p.scenario);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_scenario("[protocol]\npreset = \"basic-echo\"\ngradiant = 2\n").unwrap_err();
        match e {
            GemError::Semantic { key, .. } => assert_eq!(key, "protocol.gradiant"),
            other => panic!("{other}"),
        }
        let e = parse_scenario("gradiant = 2\n[protocol]\npreset = \"basic-echo\"\n").unwrap_err();
        assert!(e.to_string().contains("gradiant"), "{e}");
        let e = parse_scenario("[protocol]\npreset = \"basic-echo\"\nparams = { gradiant = 2.0 }\n").unwrap_err();
        assert!(e.to_string().contains("protocol.params.gradiant"), "{e}");
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_scenario("[protocol]\npreset = \"basic-echo\n").unwrap_err();
        match e {
            GemError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column >= 10, "{column}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn exactly_one_schedule_source() {
        let both = format!("{MINIMAL}[schedule.ideal]\nslope = 1.0\n");
        assert!(matches!(parse_scenario(&both), Err(GemError::Semantic { .. })));
        let neither = "[grid]\ndt = 0.01\nduration = 10.0\n";
        assert!(matches!(parse_scenario(neither), Err(GemError::Semantic { .. })));
    }

    #[test]
    fn overrides_reach_preset_params() {
        let p = parse_scenario_with(MINIMAL, &["storage=4".into(), "protocol.params.beta=3".into()]).unwrap();
        let params = &p.file.protocol.as_ref().unwrap().params;
        assert_eq!(params["storage"], 4.0);
        assert_eq!(params["beta"], 3.0);
        let q = parse_scenario_with(MINIMAL, &["detection.lo_offset=-7".into()]).unwrap();
        assert_eq!(q.scenario.detection.lo_offset, -7.0);
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_scenario(MINIMAL).unwrap();
        let b = parse_scenario_with(MINIMAL, &["beta=2.5".into()]).unwrap();
        assert_ne!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn sweep_key_must_be_numeric() {
        let mut t = parse_table(MINIMAL).unwrap();
        assert!(set_numeric(&mut t, "delta_os", 0.3).is_ok());
        assert!(set_numeric(&mut t, "protocol.preset", 1.0).is_err());
        assert!(set_numeric(&mut t, "grid.nothing", 1.0).is_err());
    }

    #[test]
    fn ideal_file_builds_events() {
        let text = r#"
[grid]
n_z = 64
dt = 0.05
duration = 40.0

[ensemble]
beta = 2.0

[schedule.ideal]
slope = 1.5
events = [{ time = 15.0, z_lo = 0.0, z_hi = 1.0, action = { kind = "flip-sign" } }]

[[pulses]]
fwhm = 3.0
peak_time = 8.0
"#;
        let p = parse_scenario(text).unwrap();
        assert_eq!(p.scenario.schedule.segments.len(), 2);
        let s = &p.scenario.schedule.segments;
        for (a, b) in s[0].profile.iter().zip(&s[1].profile) {
            assert!((a + b).abs() < 1e-12);
        }
        let beta = p.scenario.ensemble.optical_depth(1.5, 1.0);
        assert!((beta - 2.0).abs() < 1e-12, "{beta}");
        let again = parse_scenario(&p.canonical).unwrap();
        assert_eq!(again.canonical, p.canonical);
        assert_eq!(again.scenario, p.scenario);
    }

    #[test]
    fn currents_file_matches_program_to_schedule() {
        let text = r#"
[grid]
n_z = 64
dt = 0.05
duration = 20.0

[ensemble]
kappa = 10.0

[schedule.currents]
windows = [
  { t_start = 0.0, t_end = 10.0, currents = [1.0, 0.5, 0.0, -0.5, -1.0, 0.2, 0.0, 0.3] },
  { t_start = 10.0, t_end = 20.0, currents = [-1.0, -0.5, 0.0, 0.5, 1.0, -0.2, 0.0, -0.3] },
]

[[pulses]]
fwhm = 2.0
peak_time = 5.0
"#;
        let p = parse_scenario(text).unwrap();
        let program: CurrentProgram = p.file.schedule.as_ref().unwrap().currents.clone().unwrap();
        let expect = program_to_schedule(&program, &CoilArray::default(), &p.scenario.grid).unwrap();
        assert_eq!(p.scenario.schedule.segments, expect.segments);
        assert!(p.file.coils.is_some());
    }

    #[test]
    fn protocol_rejects_explicit_sections() {
        let text = format!("{MINIMAL}[[pulses]]\nfwhm = 2.0\npeak_time = 1.0\n");
        match parse_scenario(&text).unwrap_err() {
            GemError::Semantic { key, .. } => assert_eq!(key, "pulses"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wrong_units_rejected() {
        let text = format!("units = \"s Hz\"\n{MINIMAL}");
        assert!(matches!(parse_scenario(&text), Err(GemError::Semantic { .. })));
    }
}
