use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use gem_core::coils::solve_currents;
use gem_core::io::{
    aggregate_csv, apply_override, coil_warnings, parse_coil_geometry, parse_scenario_table, parse_table,
    parse_target_profile, run_bundle, set_numeric, write_atomic, write_bundle, write_coil_solution, AggregateRow,
    ParsedScenario, AGGREGATE_FILE,
};
use gem_core::scenario::Severity;
use gem_core::{GemError, Result};

#[derive(Debug, Parser)]
#[command(name = "gemsim", version, about = "Gradient echo memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for result files.
    #[arg(long, global = true, default_value = "gem-out")]
    out: PathBuf,

    /// Override a scenario value; bare keys address preset parameters.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Worker threads for sweep points (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for detector noise; only used when detection.noise_std > 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario and write its time series, fits and diagnostics.
    Run { scenario: PathBuf },
    /// Run a scenario once per value of a numeric key and tabulate the fits.
    Sweep {
        scenario: PathBuf,
        /// Dotted key to vary, e.g. delta_os or detection.lo_phase.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required_unless_present = "linspace", conflicts_with = "linspace")]
        values: Vec<f64>,
        /// START:STOP:N evenly spaced values, STOP included; append :open to exclude it.
        #[arg(long, allow_hyphen_values = true)]
        linspace: Option<String>,
    },
    /// Solve coil currents for a target detuning profile.
    FitCoils {
        /// TOML coil geometry; an empty file selects the default array.
        geometry: PathBuf,
        /// CSV target with columns z,delta_mhz.
        target: PathBuf,
        /// Ridge weight; defaults to a small fraction of the response scale.
        #[arg(long)]
        ridge: Option<f64>,
        /// Central fraction of the cell used for the RMS figure.
        #[arg(long, default_value_t = 0.8)]
        central: f64,
    },
    /// Parse and check a scenario without running it.
    Validate {
        scenario: PathBuf,
        /// Print the scenario in canonical form, defaults filled in.
        #[arg(long)]
        canonical: bool,
    },
}

fn exit_code(e: &GemError) -> u8 {
    match e {
        GemError::IntegrationFailure(_) | GemError::NumericalState(_) => 3,
        GemError::Io(_) => 1,
        _ => 2,
    }
}

fn report_error(e: &GemError) -> ExitCode {
    let line = serde_json::json!({ "error": e.class(), "message": e.to_string() });
    eprintln!("{line}");
    ExitCode::from(exit_code(e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GemError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_table(path: &Path, cli: &Cli) -> Result<gem_core::io::Table> {
    let mut table = parse_table(&read(path)?)?;
    for o in &cli.set {
        apply_override(&mut table, o)?;
    }
    if let Some(seed) = cli.seed {
        apply_override(&mut table, &format!("detection.seed={seed}"))?;
    }
    Ok(table)
}

/// Print diagnostics; fail if any is an error.
fn check(parsed: &ParsedScenario, label: &str) -> Result<()> {
    for d in &parsed.diagnostics {
        let level = match d.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        eprintln!("{level}[{}]{label}: {}", d.code, d.message);
    }
    if parsed.has_errors() {
        let n = parsed.diagnostics.iter().filter(|d| d.is_error()).count();
        return Err(GemError::Validation(format!("{n} error(s) in scenario{label}")));
    }
    Ok(())
}

fn warn_unused_seed(cli: &Cli, parsed: &ParsedScenario) {
    if cli.seed.is_some() && parsed.scenario.detection.noise_std == 0.0 {
        eprintln!("warning[seed]: --seed has no effect while detection.noise_std = 0");
    }
}

fn run(cli: &Cli, path: &Path) -> Result<()> {
    let parsed = parse_scenario_table(load_table(path, cli)?)?;
    check(&parsed, "")?;
    warn_unused_seed(cli, &parsed);
    let bundle = run_bundle(&parsed)?;
    write_bundle(&cli.out, &parsed, &bundle)?;
    let a = &bundle.report.analysis;
    println!("config {}", parsed.config_hash);
    println!("efficiency {:.6}  balance {:.3e}", a.efficiency, a.excitation_balance);
    for w in &a.windows {
        match &w.fit {
            Some(f) => println!(
                "{:<4} t0 {:.4} us  fwhm {:.4} us  omega_c {:.5} MHz  phase {:+.4} rad  energy {:.5}",
                w.label, f.t0, f.fwhm, f.omega_c, f.phase, w.energy
            ),
            None => println!("{:<4} no fit ({})", w.label, w.error.as_deref().unwrap_or("no signal")),
        }
    }
    if let Some(p) = bundle.report.relative_output_phase {
        println!("relative output phase {p:+.5} rad");
    }
    for w in &bundle.report.warnings {
        eprintln!("warning[run]: {w}");
    }
    Ok(())
}

fn linspace(spec: &str) -> Result<Vec<f64>> {
    let bad = || GemError::InvalidParameter(format!("--linspace expects START:STOP:N[:open], got {spec}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let open = match parts.get(3) {
        None => false,
        Some(&"open") => true,
        Some(_) => return Err(bad()),
    };
    if parts.len() < 3 || parts.len() > 4 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 || (n == 1 && !open && a != b) {
        return Err(bad());
    }
    let div = if open { n as f64 } else { (n.max(2) - 1) as f64 };
    Ok((0..n).map(|k| a + (b - a) * k as f64 / div).collect())
}

fn sweep(cli: &Cli, path: &Path, key: &str, values: &[f64], spec: Option<&str>) -> Result<()> {
    let values = match spec {
        Some(s) => linspace(s)?,
        None => values.to_vec(),
    };
    let base = load_table(path, cli)?;
    let mut points = Vec::with_capacity(values.len());
    for &v in &values {
        let mut t = base.clone();
        set_numeric(&mut t, key, v)?;
        let parsed = parse_scenario_table(t)?;
        check(&parsed, &format!(" at {key}={v}"))?;
        points.push(parsed);
    }
    if let Some(p) = points.first() {
        warn_unused_seed(cli, p);
    }
    let work = || -> Vec<Result<AggregateRow>> {
        points
            .par_iter()
            .zip(&values)
            .enumerate()
            .map(|(i, (p, &v))| {
                let b = run_bundle(p)?;
                write_bundle(&cli.out.join(format!("point_{i:03}")), p, &b)?;
                Ok(AggregateRow {
                    value: v,
                    report: b.report,
                })
            })
            .collect()
    };
    let results = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| GemError::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let rows: Vec<AggregateRow> = results.into_iter().collect::<Result<_>>()?;
    let table = aggregate_csv(key, &rows)?;
    write_atomic(&cli.out.join(AGGREGATE_FILE), &table)?;
    println!("{} points written to {}", rows.len(), cli.out.display());
    Ok(())
}

fn fit_coils(cli: &Cli, geometry: &Path, target: &Path, ridge: Option<f64>, central: f64) -> Result<()> {
    let array = parse_coil_geometry(&read(geometry)?)?;
    let (z, delta) = parse_target_profile(&read(target)?)?;
    let ridge = ridge.unwrap_or_else(|| array.default_ridge(&z));
    let sol = solve_currents(&array, &delta, &z, ridge, central)?;
    let warnings = coil_warnings(&array, &sol);
    for w in &warnings {
        eprintln!("warning[coils]: {w}");
    }
    write_coil_solution(&cli.out, &array, &z, &delta, &sol, &warnings)?;
    println!(
        "rms over central {:.0}%: {:.4e} MHz ({:.3}% of span)",
        100.0 * central,
        sol.rms_central,
        100.0 * sol.rms_central_relative
    );
    for (k, i) in sol.currents.iter().enumerate() {
        println!("coil {k}: {i:+.6} A");
    }
    Ok(())
}

fn validate(cli: &Cli, path: &Path, canonical: bool) -> Result<()> {
    let parsed = parse_scenario_table(load_table(path, cli)?)?;
    if canonical {
        print!("{}", parsed.canonical);
    }
    check(&parsed, "")?;
    eprintln!("ok: {} ({} warning(s))", parsed.config_hash, parsed.diagnostics.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { scenario } => run(&cli, scenario),
        Command::Sweep {
            scenario,
            key,
            values,
            linspace,
        } => sweep(&cli, scenario, key, values, linspace.as_deref()),
        Command::FitCoils {
            geometry,
            target,
            ridge,
            central,
        } => fit_coils(&cli, geometry, target, *ridge, *central),
        Command::Validate { scenario, canonical } => validate(&cli, scenario, *canonical),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
