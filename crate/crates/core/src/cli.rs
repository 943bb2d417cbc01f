//! Command-line front end: `scan`, `dressed` and `analyze`.
//!
//! Exit codes: 0 on success, 2 for bad configuration or input files, 3 when
//! the solver fails on more than [`FAILURE_FRACTION`] of the scan points.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{assign_orders, find_peaks, label_symmetric, write_peak_report};
use crate::dressed::{
    dressed_states_general, dressed_states_resonant, multiphoton_peak_positions, raman_peak_positions,
    DressedLevel, MultiphotonModel,
};
use crate::error::Error;
use crate::lindblad::max_cutoff_from_env;
use crate::params::{parse_scaled, SystemParams};
use crate::lindblad::MAX_CUTOFF_ENV;
use crate::scan::{run_scan_with, Column, ScanModel, ScanOptions, ScanRecord, ScanScheme, ScanSpec, Spectrum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Largest tolerated share of failed scan points.
pub const FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "lambda-cqed", version, about = "Steady-state spectra of a driven Λ atom in a cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the probe along one line of the (ω31, ωc) plane.
    Scan(ScanArgs),
    /// Tabulate the dressed levels of the n-excitation manifolds.
    Dressed(DressedArgs),
    /// Locate peaks in a spectrum CSV and assign photon orders.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Flat `key = value` parameter file; missing keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Held coordinate of the scan line; accepts a `*g` suffix.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub from: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub to: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    pub model: ModelArg,
    /// Spectrum CSV path; the manifest and JSON mirror are written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Named experiment; explicit flags override its choices.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct DressedArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub n_max: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Spectrum CSV written by `scan`.
    #[arg(long)]
    pub spectrum: PathBuf,
    #[arg(long, value_enum)]
    pub formula: Formula,
    #[arg(long)]
    pub out: PathBuf,
    /// Parameters that fix the predicted positions (g, Ω, η).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// ωc − ω31 along the scanned line; accepts a `*g` suffix.
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    pub offset: String,
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
    /// Assignment tolerance (default: two grid steps).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Minimum peak prominence as a fraction of the column maximum.
    #[arg(long, default_value_t = 1e-3)]
    pub min_prominence: f64,
    #[arg(long, value_enum, default_value = "mean_n")]
    pub column: ColumnArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Diagonal,
    Vertical,
    Horizontal,
}

impl From<SchemeArg> for ScanScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Diagonal => ScanScheme::Diagonal,
            SchemeArg::Vertical => ScanScheme::Vertical,
            SchemeArg::Horizontal => ScanScheme::Horizontal,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Exact,
    Semiclassical,
}

impl From<ModelArg> for ScanModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Exact => ScanModel::Exact,
            ModelArg::Semiclassical => ScanModel::Semiclassical,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Formula {
    TwoLevel,
    ThreeLevel,
    Raman,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ColumnArg {
    MeanN,
    S11,
    S22,
    S33,
}

impl From<ColumnArg> for Column {
    fn from(c: ColumnArg) -> Self {
        match c {
            ColumnArg::MeanN => Column::MeanN,
            ColumnArg::S11 => Column::S11,
            ColumnArg::S22 => Column::S22,
            ColumnArg::S33 => Column::S33,
        }
    }
}

/// Which parameter baseline a preset starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Ω = 0 and γ32 = 0 are forced on top of the loaded config.
    TwoLevel,
    /// The loaded config is used unchanged.
    ThreeLevel,
}

/// Scan choices behind a `--preset` name. Lengths are in units of g unless
/// `in_eta` is set, in which case the range is in units of η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub baseline: Baseline,
    pub scheme: ScanScheme,
    pub offset_g: f64,
    pub from: f64,
    pub to: f64,
    pub in_eta: bool,
    pub points: usize,
}

const fn preset(
    name: &'static str,
    baseline: Baseline,
    scheme: ScanScheme,
    offset_g: f64,
    range: (f64, f64, bool),
    points: usize,
) -> Preset {
    Preset {
        name,
        baseline,
        scheme,
        offset_g,
        from: range.0,
        to: range.1,
        in_eta: range.2,
        points,
    }
}

const WIDE: (f64, f64, bool) = (-1.2, 1.2, false);
const RAMAN: (f64, f64, bool) = (-2.0, 2.0, true);

pub const PRESETS: &[Preset] = {
    use Baseline::{ThreeLevel as L3, TwoLevel as L2};
    use ScanScheme::{Diagonal as D, Horizontal as H, Vertical as V};
    &[
        preset("fig4a", L2, D, 0.0, WIDE, 2001),
        preset("fig4b", L2, D, -1.0 / 3.0, WIDE, 2001),
        preset("fig5a", L2, V, 0.0, WIDE, 2001),
        preset("fig5b", L2, V, -1.0 / 3.0, WIDE, 2001),
        preset("fig5c", L2, V, -2.0 / 3.0, WIDE, 2001),
        preset("fig5d", L2, V, -1.0, WIDE, 2001),
        preset("fig6a", L2, H, 0.0, WIDE, 2001),
        preset("fig6b", L2, H, -1.0 / 3.0, WIDE, 2001),
        preset("fig6c", L2, H, -2.0 / 3.0, WIDE, 2001),
        preset("fig6d", L2, H, -1.0, WIDE, 2001),
        preset("fig7a", L3, D, 0.0, WIDE, 2001),
        preset("fig7b", L3, D, -1.0 / 3.0, WIDE, 2001),
        preset("fig8a", L3, V, 0.0, WIDE, 2001),
        preset("fig8b", L3, V, 1.0 / 3.0, WIDE, 2001),
        preset("fig8c", L3, V, 2.0 / 3.0, WIDE, 2001),
        preset("fig8d", L3, V, 1.0, WIDE, 2001),
        preset("fig9a", L3, H, 0.0, WIDE, 2001),
        preset("fig9b", L3, H, 1.0 / 3.0, WIDE, 2001),
        preset("fig9c", L3, H, 2.0 / 3.0, WIDE, 2001),
        preset("fig9d", L3, H, 1.0, WIDE, 2001),
        preset("fig10a", L3, H, 0.0, RAMAN, 801),
        preset("fig10b", L3, D, 0.0, RAMAN, 801),
        preset("fig11a", L3, D, 0.0, RAMAN, 801),
        preset("fig11b", L3, D, 1.0, RAMAN, 801),
        preset("fig11c", L3, D, 2.0, RAMAN, 801),
        preset("fig11d", L3, D, 3.0, RAMAN, 801),
    ]
};

pub fn find_preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Failure reported by a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn solver(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_SOLVER,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::CutoffNotConverged { .. } => {
                CliError::solver(format!("{e}; raise the ceiling with {MAX_CUTOFF_ENV}"))
            }
            Error::SingularSystem(_) => CliError::solver(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Scan(a) => cmd_scan(&a).map(|_| ()),
        Command::Dressed(a) => cmd_dressed(&a),
        Command::Analyze(a) => cmd_analyze(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load_params(config: Option<&Path>) -> Result<SystemParams, CliError> {
    match config {
        Some(path) => SystemParams::from_config_file(path).map_err(|e| match e {
            Error::Io(io) => io_error(path, io),
            other => CliError::config(format!("{}: {other}", path.display())),
        }),
        None => Ok(SystemParams::paper_defaults()),
    }
}

fn scaled(flag: &str, text: &str, g: f64) -> Result<f64, CliError> {
    parse_scaled(text, g).map_err(|reason| CliError::config(format!("--{flag}: {reason}")))
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: SystemParams,
    pub preset: Option<String>,
    pub scheme: ScanScheme,
    pub offset: f64,
    pub probe_from: f64,
    pub probe_to: f64,
    pub points: usize,
    pub model: ScanModel,
    /// Fock cutoff used at every point.
    pub cutoff: usize,
    pub max_cutoff: usize,
    pub failures: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SpectrumMirror<'a> {
    scheme: ScanScheme,
    offset: f64,
    model: ScanModel,
    params: SystemParams,
    records: &'a [ScanRecord],
}

/// Manifest and JSON mirror paths derived from the CSV path.
pub fn companion_paths(out: &Path) -> (PathBuf, PathBuf) {
    (out.with_extension("manifest.json"), out.with_extension("json"))
}

/// Resolves the scan request into parameters and a scan line.
pub fn resolve_scan(args: &ScanArgs) -> Result<(SystemParams, ScanSpec), CliError> {
    let mut params = load_params(args.config.as_deref())?;
    let preset = match &args.preset {
        Some(name) => Some(find_preset(name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            CliError::config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })?),
        None => None,
    };
    if preset.is_some_and(|p| p.baseline == Baseline::TwoLevel) {
        params.omega_free = 0.0;
        params.gamma32 = 0.0;
    }
    let g = params.g;
    let unit = |p: &Preset| if p.in_eta { params.eta } else { g };

    let scheme = match (args.scheme, preset) {
        (Some(s), _) => s.into(),
        (None, Some(p)) => p.scheme,
        (None, None) => return Err(CliError::config("--scheme is required without --preset")),
    };
    let offset = match (&args.offset, preset) {
        (Some(t), _) => scaled("offset", t, g)?,
        (None, Some(p)) => p.offset_g * g,
        (None, None) => 0.0,
    };
    let from = match (&args.from, preset) {
        (Some(t), _) => scaled("from", t, g)?,
        (None, Some(p)) => p.from * unit(p),
        (None, None) => return Err(CliError::config("--from is required without --preset")),
    };
    let to = match (&args.to, preset) {
        (Some(t), _) => scaled("to", t, g)?,
        (None, Some(p)) => p.to * unit(p),
        (None, None) => return Err(CliError::config("--to is required without --preset")),
    };
    let points = match (args.points, preset) {
        (Some(n), _) => n,
        (None, Some(p)) => p.points,
        (None, None) => return Err(CliError::config("--points is required without --preset")),
    };
    let spec = ScanSpec::new(scheme, offset, from, to, points).with_model(args.model.into());
    spec.validate()?;
    Ok((params, spec))
}

/// Runs a scan and writes the CSV, JSON mirror and manifest.
pub fn cmd_scan(args: &ScanArgs) -> Result<RunManifest, CliError> {
    let (params, spec) = resolve_scan(args)?;
    let max_cutoff = max_cutoff_from_env();
    if spec.step() > params.kappa / 2.0 {
        eprintln!(
            "warning: grid step {:.3e} exceeds κ/2 = {:.3e}; narrow resonances may fall between points",
            spec.step(),
            params.kappa / 2.0
        );
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("--jobs: {e}")))?;

    let started = Instant::now();
    let outcome = pool.install(|| run_scan_with(&spec, &params, &ScanOptions::default()))?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let spectrum = &outcome.spectrum;
    let failures = spectrum.failures();
    for r in spectrum.records.iter().filter(|r| !r.converged) {
        eprintln!("warning: no steady state at probe = {}", r.probe);
    }

    let (manifest_path, json_path) = companion_paths(&args.out);
    spectrum
        .write_csv_file(&args.out)
        .map_err(|e| io_error(&args.out, e))?;
    let json = File::create(&json_path).map_err(|e| io_error(&json_path, e))?;
    let mirror = SpectrumMirror {
        scheme: spec.scheme,
        offset: spec.offset,
        model: spec.model,
        params: params.with_n_fock(outcome.n_fock),
        records: &spectrum.records,
    };
    serde_json::to_writer_pretty(BufWriter::new(json), &mirror).map_err(|e| io_error(&json_path, e))?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: params.with_n_fock(outcome.n_fock),
        preset: args.preset.clone(),
        scheme: spec.scheme,
        offset: spec.offset,
        probe_from: spec.probe_from,
        probe_to: spec.probe_to,
        points: spec.points,
        model: spec.model,
        cutoff: outcome.n_fock,
        max_cutoff,
        failures,
        wall_time_s,
        outputs: vec![args.out.clone(), json_path.clone(), manifest_path.clone()],
    };
    let file = File::create(&manifest_path).map_err(|e| io_error(&manifest_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| io_error(&manifest_path, e))?;
    writeln!(w).map_err(|e| io_error(&manifest_path, e))?;

    if failures as f64 > FAILURE_FRACTION * spec.points as f64 {
        return Err(CliError::solver(format!(
            "{failures} of {} points failed (limit {:.0}%)",
            spec.points,
            FAILURE_FRACTION * 100.0
        )));
    }
    Ok(manifest)
}

/// Sorts by energy and fixes the sign so the largest component is positive,
/// matching the convention of [`dressed_states_general`].
fn canonical(mut levels: Vec<DressedLevel>) -> Vec<DressedLevel> {
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    for level in &mut levels {
        let lead = (0..3)
            .max_by(|&a, &b| level.amplitudes[a].norm().total_cmp(&level.amplitudes[b].norm()).then(b.cmp(&a)))
            .unwrap();
        if level.amplitudes[lead].re < 0.0 {
            level.amplitudes.iter_mut().for_each(|c| *c = -*c);
        }
    }
    levels
}

pub fn cmd_dressed(args: &DressedArgs) -> Result<(), CliError> {
    let params = load_params(args.config.as_deref())?;
    let closed_form = dressed_states_resonant(0, &params).is_ok();

    let mut header = vec!["n", "branch", "energy", "c1_re", "c1_im", "c2_re", "c2_im", "c3_re", "c3_im", "method"];
    if closed_form {
        header.extend(["closed_energy", "closed_c1", "closed_c2", "closed_c3"]);
    }
    let file = File::create(&args.out).map_err(|e| io_error(&args.out, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| io_error(&args.out, e);
    w.write_record(&header).map_err(csv_err)?;

    for n in 0..=args.n_max {
        let general = dressed_states_general(n, &params);
        let closed = if closed_form {
            let (z, m, p) = dressed_states_resonant(n, &params)?;
            Some(canonical(vec![z, m, p]))
        } else {
            None
        };
        for (k, level) in general.iter().enumerate() {
            let mut row = vec![n.to_string()];
            let branch = closed.as_ref().map_or(level.branch, |c| c[k].branch);
            row.push(branch.as_str().to_string());
            row.push(level.energy.to_string());
            for c in level.amplitudes {
                row.push(c.re.to_string());
                row.push(c.im.to_string());
            }
            match &closed {
                Some(c) => {
                    row.push("closed_form".into());
                    row.push(c[k].energy.to_string());
                    row.extend(c[k].amplitudes.iter().map(|a| a.re.to_string()));
                }
                None => row.push("general".into()),
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| io_error(&args.out, e))?;
    Ok(())
}

/// Predicted peak positions for the chosen formula.
pub fn predictions(formula: Formula, params: &SystemParams, mismatch: f64, n_max: usize) -> Vec<f64> {
    // ω31 − ωc enters the multiphoton formulas through Δ1 − Δc
    let p = params.with_detunings(0.0, mismatch, mismatch);
    match formula {
        Formula::TwoLevel => multiphoton_peak_positions(n_max, &p, MultiphotonModel::TwoLevel),
        Formula::ThreeLevel => multiphoton_peak_positions(n_max, &p, MultiphotonModel::ThreeLevel),
        Formula::Raman => raman_peak_positions(n_max, params.eta),
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let params = load_params(args.config.as_deref())?;
    let offset = scaled("offset", &args.offset, params.g)?;
    let spectrum = Spectrum::read_csv_file(&args.spectrum).map_err(|e| match e {
        Error::Io(io) => io_error(&args.spectrum, io),
        other => CliError::config(format!("{}: {other}", args.spectrum.display())),
    })?;
    let valid: Vec<_> = spectrum.records.iter().copied().filter(|r| r.converged).collect();
    if valid.len() < 3 {
        return Err(CliError::config(format!(
            "{}: only {} converged points",
            args.spectrum.display(),
            valid.len()
        )));
    }
    let spectrum = Spectrum::new(valid)?;
    let column = Column::from(args.column);
    let values = spectrum.column(column);
    let top = values.iter().copied().fold(0.0_f64, f64::max);
    let peaks = find_peaks(&spectrum, column, args.min_prominence * top);

    let tol = args.tol.unwrap_or(2.0 * spectrum.min_step());
    let preds = label_symmetric(&predictions(args.formula, &params, -offset, args.n_max));
    let assignments = assign_orders(&peaks, &preds, tol);

    let file = File::create(&args.out).map_err(|e| io_error(&args.out, e))?;
    write_peak_report(&assignments, BufWriter::new(file)).map_err(|e| io_error(&args.out, e))?;
    Ok(())
}
