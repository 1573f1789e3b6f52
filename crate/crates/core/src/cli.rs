//! Command-line front end: `sweep`, `validate` and `tableaux`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::{
    halving_steps, run_sweep, ConvergenceReport, MethodId, SweepConfig, DEFAULT_TOLERANCE,
};
use crate::bortz::JacobianMode;
use crate::coning::{
    affine_coning_oracle, appendix_increment_identity_check, goodman_robinson_beta_quadrature,
    miller_single_speed, rk4_theta2, rk4_theta3, rk4_theta3_from_nodes,
};
use crate::error::Error;
use crate::rate_model::MeasurementWindow;
use crate::rk::{builtin_tableaux, validate_tableau};
use crate::so3::{dcm_from_rotation_vector, rotation_vector_from_dcm, RotationVector, Vec3};
use crate::trajectory::{exact_attitude, reference_attitude, AnalyticAttitudeSignal, PRESET_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const THREADS_ENV: &str = "CONING_KIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "coning-kit",
    version,
    about = "Strapdown attitude integration and coning-correction benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence sweep and write one row per (method, dt).
    Sweep(Box<SweepArgs>),
    /// Run the built-in oracle checks.
    Validate,
    /// Print the built-in Butcher tableaux and their validation status.
    Tableaux,
}

#[derive(Debug, Args, Default)]
struct SweepArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Signal preset: poly3, fourier3 or coning.
    #[arg(long)]
    signal: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated step sizes, largest first.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "dt-max")]
    dt_max: Option<String>,
    #[arg(long)]
    halvings: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// exact or approx.
    #[arg(long)]
    jacobian: Option<String>,
    /// Reference attitude tolerance in rad.
    #[arg(long)]
    tolerance: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or tsv.
    #[arg(long)]
    format: Option<String>,
    /// Write 0 for wall time so output is byte-stable.
    #[arg(long)]
    no_timing: bool,
}

const CONFIG_KEYS: [&str; 11] = [
    "signal",
    "methods",
    "dt",
    "dt_max",
    "halvings",
    "horizon",
    "jacobian",
    "tolerance",
    "output",
    "format",
    "timing",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Tsv,
}

impl OutputFormat {
    fn delimiter(&self) -> char {
        match self {
            OutputFormat::Csv => ',',
            OutputFormat::Tsv => '\t',
        }
    }
}

/// Fully resolved `sweep` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub signal_name: String,
    pub sweep: SweepConfig,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

fn config_error(key: &str, value: &str, accepted: &str) -> Error {
    Error::Config(format!(
        "invalid value '{value}' for {key}; accepted: {accepted}"
    ))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            ))
        })?;
        let key = key.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key '{key}'; accepted keys: {}",
                lineno + 1,
                CONFIG_KEYS.join(", ")
            )));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parse_positive(key: &str, value: &str) -> Result<f64, Error> {
    match value.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err(config_error(key, value, "a positive number")),
    }
}

fn resolve(args: &SweepArgs) -> Result<CliConfig, Error> {
    let mut settings = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    // Step sizes given on the command line replace the file's step settings wholesale.
    if args.dt.is_some() {
        settings.remove("dt_max");
        settings.remove("halvings");
    }
    if args.dt_max.is_some() || args.halvings.is_some() {
        settings.remove("dt");
    }
    let flags = [
        ("signal", &args.signal),
        ("methods", &args.methods),
        ("dt", &args.dt),
        ("dt_max", &args.dt_max),
        ("halvings", &args.halvings),
        ("horizon", &args.horizon),
        ("jacobian", &args.jacobian),
        ("tolerance", &args.tolerance),
        ("format", &args.format),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            settings.insert(key.to_string(), v.clone());
        }
    }
    if let Some(path) = &args.output {
        settings.insert("output".into(), path.display().to_string());
    }
    if args.no_timing {
        settings.insert("timing".into(), "false".into());
    }

    let signal_name = settings
        .get("signal")
        .cloned()
        .unwrap_or_else(|| "coning".into());
    let signal = AnalyticAttitudeSignal::preset(&signal_name)
        .ok_or_else(|| config_error("signal", &signal_name, &PRESET_NAMES.join(", ")))?;

    let methods = match settings.get("methods") {
        Some(list) => list
            .split(',')
            .map(|name| {
                MethodId::parse(name)
                    .ok_or_else(|| config_error("methods", name.trim(), &MethodId::valid_names()))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => MethodId::FIXED.to_vec(),
    };

    let step_sizes = if let Some(list) = settings.get("dt") {
        if settings.contains_key("dt_max") || settings.contains_key("halvings") {
            return Err(Error::Config(
                "dt conflicts with dt_max/halvings; give one or the other".into(),
            ));
        }
        list.split(',')
            .map(|v| parse_positive("dt", v))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let dt_max = match settings.get("dt_max") {
            Some(v) => parse_positive("dt_max", v)?,
            None => 0.25,
        };
        let halvings = match settings.get("halvings") {
            Some(v) => v
                .trim()
                .parse::<u32>()
                .ok()
                .filter(|h| *h <= 30)
                .ok_or_else(|| config_error("halvings", v, "an integer from 0 to 30"))?,
            None => 8,
        };
        halving_steps(dt_max, halvings)
    };

    let horizon = match settings.get("horizon") {
        Some(v) => parse_positive("horizon", v)?,
        None => 4.0,
    };
    let tolerance = match settings.get("tolerance") {
        Some(v) => parse_positive("tolerance", v)?,
        None => DEFAULT_TOLERANCE,
    };
    let jacobian = match settings
        .get("jacobian")
        .map(|s| s.trim().to_ascii_lowercase())
        .as_deref()
    {
        None | Some("exact") => JacobianMode::ExactClosedForm,
        Some("approx") => JacobianMode::ThirdOrderApprox,
        Some(other) => return Err(config_error("jacobian", other, "exact, approx")),
    };
    let format = match settings
        .get("format")
        .map(|s| s.trim().to_ascii_lowercase())
        .as_deref()
    {
        None | Some("csv") => OutputFormat::Csv,
        Some("tsv") => OutputFormat::Tsv,
        Some(other) => return Err(config_error("format", other, "csv, tsv")),
    };
    let record_timing = match settings
        .get("timing")
        .map(|s| s.trim().to_ascii_lowercase())
        .as_deref()
    {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => return Err(config_error("timing", other, "true, false")),
    };

    let sweep = SweepConfig {
        signal,
        methods,
        step_sizes,
        horizon,
        tolerance,
        jacobian,
        record_timing,
    };
    sweep.validate()?;
    Ok(CliConfig {
        signal_name,
        sweep,
        output: settings.get("output").map(PathBuf::from),
        format,
    })
}

pub const CSV_HEADER: [&str; 6] = [
    "method",
    "jacobian_mode",
    "dt",
    "steps",
    "final_error_rad",
    "wall_time_s",
];

/// Rows in report order; floats use the shortest round-trip representation.
pub fn render_records(report: &ConvergenceReport, format: OutputFormat) -> String {
    let sep = format.delimiter().to_string();
    let mut out = CSV_HEADER.join(&sep);
    out.push('\n');
    for r in &report.records {
        let mode = if r.method.uses_rate_samples() {
            r.jacobian_mode.name()
        } else {
            "n/a"
        };
        let fields = [
            r.method.to_string(),
            mode.to_string(),
            format!("{:?}", r.dt),
            r.steps.to_string(),
            format!("{:?}", r.final_error_angle),
            format!("{:?}", r.wall_time),
        ];
        out.push_str(&fields.join(&sep));
        out.push('\n');
    }
    out
}

fn thread_count() -> Result<usize, Error> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| config_error(THREADS_ENV, &v, "a non-negative integer (0 = automatic)")),
    }
}

fn run_sweep_command(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match resolve(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let threads = match thread_count() {
        Ok(n) => n,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return EXIT_VALIDATION;
        }
    };
    let report = match pool.install(|| run_sweep(&cfg.sweep)) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: sweep failed: {e}");
            return match e {
                Error::Config(_) | Error::InvalidSignal(_) => EXIT_CONFIG,
                _ => EXIT_VALIDATION,
            };
        }
    };
    let text = render_records(&report, cfg.format);
    let written = match &cfg.output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| format!("cannot write output: {e}")),
    };
    if let Err(msg) = written {
        let _ = writeln!(err, "error: {msg}");
        return EXIT_VALIDATION;
    }
    let _ = writeln!(
        err,
        "signal {} horizon {} s",
        cfg.signal_name, cfg.sweep.horizon
    );
    for fit in &report.fits {
        let _ = match &fit.estimate {
            Ok(e) => writeln!(
                err,
                "  {:<14} order {:.3} (rms residual {:.3}, {} points)",
                fit.method.to_string(),
                e.slope,
                e.residual,
                e.used
            ),
            Err(e) => writeln!(
                err,
                "  {:<14} order unavailable: {e}",
                fit.method.to_string()
            ),
        };
    }
    EXIT_OK
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, limit: f64) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= limit,
        detail: format!("worst {worst:.3e}, limit {limit:.0e}"),
    }
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() <= 1.0 {
            return v;
        }
    }
}

/// The self-validation oracle chain, in a fixed order with fixed seeds.
pub fn validation_checks() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut outcomes = Vec::new();

    let mut appendix: f64 = 0.0;
    let mut quadrature: f64 = 0.0;
    for _ in 0..100 {
        let (p1, p2) = (unit_ball(&mut rng), unit_ball(&mut rng));
        let scale = p1.cross(&p2).norm();
        for dt in [1.0f64, 0.1, 0.01] {
            let cube = dt.powi(3) * scale;
            appendix = appendix.max(appendix_increment_identity_check(&p1, &p2, dt) / cube);
            let quad = goodman_robinson_beta_quadrature(|t| Ok(p1 + p2 * t), 0.0, dt, 8);
            let diff = match quad {
                Ok(b) => (b - affine_coning_oracle(&p1, &p2, dt)).norm() / cube,
                Err(_) => f64::INFINITY,
            };
            quadrature = quadrature.max(diff);
        }
    }
    outcomes.push(check("appendix increment identity", appendix, 1e-15));
    outcomes.push(check("quadrature beta vs affine oracle", quadrature, 1e-12));

    let mut miller: f64 = 0.0;
    for _ in 0..10_000 {
        let dt = rng.random_range(1e-3..1.0);
        let (prev, curr) = (unit_ball(&mut rng) * dt, unit_ball(&mut rng) * dt);
        let classic = miller_single_speed(&prev, &curr).delta_phi.vector();
        let rel = MeasurementWindow::theta2(prev, curr, dt)
            .and_then(|w| rk4_theta2(&w))
            .map(|r| (r.delta_phi.vector() - classic).norm() / classic.norm())
            .unwrap_or(f64::INFINITY);
        miller = miller.max(rel);
    }
    outcomes.push(check(
        "rk4 theta2 equals single-speed correction",
        miller,
        1e-15,
    ));

    let mut theta3: f64 = 0.0;
    for _ in 0..1000 {
        let dt = rng.random_range(1e-3..1.0);
        let w = MeasurementWindow::theta3(
            unit_ball(&mut rng) * dt,
            unit_ball(&mut rng) * dt,
            unit_ball(&mut rng) * dt,
            dt,
        );
        let rel = w
            .and_then(|w| Ok((rk4_theta3(&w)?, rk4_theta3_from_nodes(&w)?)))
            .map(|(a, b)| {
                (a.delta_phi.vector() - b.delta_phi.vector()).norm() / a.delta_phi.angle()
            })
            .unwrap_or(f64::INFINITY);
        theta3 = theta3.max(rel);
    }
    outcomes.push(check("theta3 formula vs quadratic-node rk4", theta3, 1e-13));

    let mut round_trip: f64 = 0.0;
    for _ in 0..10_000 {
        let axis = unit_ball(&mut rng).normalize();
        let phi = axis * rng.random_range(0.0..std::f64::consts::PI - 0.1);
        let back = rotation_vector_from_dcm(&dcm_from_rotation_vector(&RotationVector::new(phi)))
            .map(|r| (r.vector() - phi).norm())
            .unwrap_or(f64::INFINITY);
        round_trip = round_trip.max(back);
    }
    outcomes.push(check("exp/log round trip", round_trip, 1e-11));

    let coning = AnalyticAttitudeSignal::preset("coning").expect("preset exists");
    let period = 2.0 * std::f64::consts::PI / 10.0;
    let reference = reference_attitude(&coning, 0.0, period, 1e-12).and_then(|r| {
        let start = exact_attitude(&coning, 0.0).expect("coning has a closed form");
        let end = exact_attitude(&coning, period).expect("coning has a closed form");
        crate::so3::attitude_error_angle(&r, &crate::so3::compose(&end, &start.transpose()))
    });
    outcomes.push(check(
        "reference attitude vs closed-form coning",
        reference.unwrap_or(f64::INFINITY),
        1e-11,
    ));

    outcomes
}

fn run_validate(out: &mut dyn Write) -> i32 {
    let outcomes = validation_checks();
    for o in &outcomes {
        let _ = writeln!(
            out,
            "{} {}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
    }
    if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn run_tableaux(out: &mut dyn Write) -> i32 {
    let mut all_valid = true;
    let mut text = String::new();
    for tab in builtin_tableaux() {
        let status = match validate_tableau(&tab) {
            Ok(()) => "valid".to_string(),
            Err(v) => {
                all_valid = false;
                let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
                format!("INVALID: {}", msgs.join("; "))
            }
        };
        let _ = writeln!(text, "{} ({} stages): {status}", tab.name, tab.stages());
        for (row, c) in tab.a.iter().zip(&tab.c) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(text, "  {c:.6} | {}", cells.join(" "));
        }
        let weights: Vec<String> = tab.b.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(text, "  {:8} | {}", "", weights.join(" "));
    }
    let _ = out.write_all(text.as_bytes());
    if all_valid {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

/// Runs the command line given in `argv` (program name first) and returns
/// the process exit code.
pub fn run_cli_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match &cli.command {
        Command::Sweep(args) => run_sweep_command(args, out, err),
        Command::Validate => run_validate(out),
        Command::Tableaux => run_tableaux(out),
    }
}

pub fn run_cli(argv: &[String]) -> i32 {
    run_cli_with(
        argv,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
