//! One-dimensional cuts through the (ω31, ωc) plane.
//!
//! `probe` is the swept coordinate and `offset` the held one:
//!
//! | scheme     | held          | Δ1        | Δc              |
//! |------------|---------------|-----------|-----------------|
//! | diagonal   | ωc − ω31      | −probe    | Δ1 + offset     |
//! | vertical   | ω31 − ωl      | offset    | −probe          |
//! | horizontal | ωc − ωl       | −probe    | offset          |
//!
//! and in every scheme Δ2 = Δ1 − atomic_splitting.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::CompositeOps;
use crate::lindblad::{
    build_liouvillian_with, choose_cutoff, observables, steady_state, StateDiagnostics,
};
use crate::params::SystemParams;
use crate::semiclassical::{default_horizon, integrate_to_steady, MeanFieldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanScheme {
    Diagonal,
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanModel {
    Exact,
    Semiclassical,
}

macro_rules! str_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

str_enum!(ScanScheme { Diagonal => "diagonal", Vertical => "vertical", Horizontal => "horizontal" });
str_enum!(ScanModel { Exact => "exact", Semiclassical => "semiclassical" });

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub scheme: ScanScheme,
    pub offset: f64,
    /// ω31 − ω32.
    pub atomic_splitting: f64,
    pub probe_from: f64,
    pub probe_to: f64,
    pub points: usize,
    pub model: ScanModel,
}

impl ScanSpec {
    pub fn new(scheme: ScanScheme, offset: f64, probe_from: f64, probe_to: f64, points: usize) -> Self {
        Self {
            scheme,
            offset,
            atomic_splitting: 0.0,
            probe_from,
            probe_to,
            points,
            model: ScanModel::Exact,
        }
    }

    pub fn with_model(mut self, model: ScanModel) -> Self {
        self.model = model;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probe_from.is_finite() && self.probe_to.is_finite()) || self.probe_from >= self.probe_to {
            return Err(Error::InvalidParameter {
                field: "probe range",
                reason: format!("need from < to, got [{}, {}]", self.probe_from, self.probe_to),
            });
        }
        if self.points < 2 {
            return Err(Error::InvalidParameter {
                field: "points",
                reason: format!("need at least 2, got {}", self.points),
            });
        }
        for (field, v) in [("offset", self.offset), ("atomic_splitting", self.atomic_splitting)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.probe_to - self.probe_from) / (self.points - 1) as f64
    }

    /// The k-th probe value; the last one is exactly `probe_to`.
    pub fn probe(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            self.probe_to
        } else {
            self.probe_from + k as f64 * self.step()
        }
    }

    pub fn probes(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.probe(k)).collect()
    }
}

/// (Δc, Δ1, Δ2) at one probe value.
pub fn resolve_detunings(spec: &ScanSpec, probe: f64) -> (f64, f64, f64) {
    let (delta_c, delta_1) = match spec.scheme {
        ScanScheme::Diagonal => (-probe + spec.offset, -probe),
        ScanScheme::Vertical => (-probe, spec.offset),
        ScanScheme::Horizontal => (spec.offset, -probe),
    };
    (delta_c, delta_1, delta_1 - spec.atomic_splitting)
}

pub fn params_at(spec: &ScanSpec, params: &SystemParams, probe: f64) -> SystemParams {
    let (dc, d1, d2) = resolve_detunings(spec, probe);
    params.with_detunings(dc, d1, d2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub probe: f64,
    pub mean_n: f64,
    pub s11: f64,
    pub s22: f64,
    pub s33: f64,
    pub converged: bool,
}

impl ScanRecord {
    fn failed(probe: f64) -> Self {
        Self {
            probe,
            mean_n: f64::NAN,
            s11: f64::NAN,
            s22: f64::NAN,
            s33: f64::NAN,
            converged: false,
        }
    }

    pub fn population_sum(&self) -> f64 {
        self.s11 + self.s22 + self.s33
    }
}

/// Per-point solver checks for exact scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub relative_residual: f64,
    pub top_fock_population: f64,
}

impl From<(StateDiagnostics, f64)> for PointCheck {
    fn from((d, top): (StateDiagnostics, f64)) -> Self {
        Self {
            trace_error: d.trace_error,
            hermiticity_error: d.hermiticity_error,
            min_eigenvalue: d.min_eigenvalue,
            relative_residual: d.relative_residual,
            top_fock_population: top,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    MeanN,
    S11,
    S22,
    S33,
}

str_enum!(Column { MeanN => "mean_n", S11 => "s11", S22 => "s22", S33 => "s33" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub records: Vec<ScanRecord>,
    /// Solver checks, one per record; empty for semiclassical scans and
    /// for spectra read back from CSV.
    #[serde(skip)]
    pub checks: Vec<Option<PointCheck>>,
}

impl Spectrum {
    pub fn new(records: Vec<ScanRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::MalformedSpectrum("no records".into()));
        }
        if let Some(w) = records.windows(2).find(|w| w[1].probe <= w[0].probe) {
            return Err(Error::MalformedSpectrum(format!(
                "probe not strictly increasing at {}",
                w[1].probe
            )));
        }
        Ok(Self {
            records,
            checks: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn probes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.probe).collect()
    }

    pub fn column(&self, column: Column) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| match column {
                Column::MeanN => r.mean_n,
                Column::S11 => r.s11,
                Column::S22 => r.s22,
                Column::S33 => r.s33,
            })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.converged).count()
    }

    /// Smallest spacing between consecutive probe values.
    pub fn min_step(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].probe - w[0].probe)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["probe", "mean_n", "s11", "s22", "s33", "converged"];
        if headers.iter().ne(expected) {
            return Err(Error::MalformedSpectrum(format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ScanRecord>, _>>()
            .map_err(|e| Error::MalformedSpectrum(e.to_string()))?;
        Self::new(records)
    }

    pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Tolerance passed to [`choose_cutoff`].
    pub cutoff_tol: f64,
    /// Points in the coarse pass that locates the brightest probe value.
    pub coarse_points: usize,
    /// Skip cutoff selection and use `params.n_fock` as given.
    pub fixed_cutoff: bool,
    /// Convergence threshold on ‖d(state)/dt‖ for the mean-field model.
    pub mean_field_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            cutoff_tol: 1e-6,
            coarse_points: 41,
            fixed_cutoff: false,
            mean_field_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub spectrum: Spectrum,
    /// Fock cutoff used at every point.
    pub n_fock: usize,
}

pub fn run_scan(spec: &ScanSpec, params: &SystemParams) -> Result<ScanOutcome> {
    run_scan_with(spec, params, &ScanOptions::default())
}

/// Solves every point of the scan. Points whose solve fails are kept as
/// non-converged records.
pub fn run_scan_with(spec: &ScanSpec, params: &SystemParams, opts: &ScanOptions) -> Result<ScanOutcome> {
    spec.validate()?;
    params.validate()?;
    let n_fock = match spec.model {
        ScanModel::Semiclassical => params.n_fock,
        ScanModel::Exact if opts.fixed_cutoff => params.n_fock,
        ScanModel::Exact => select_cutoff(spec, params, opts)?,
    };
    let base = params.with_n_fock(n_fock);
    let probes = spec.probes();
    let (records, checks): (Vec<ScanRecord>, Vec<Option<PointCheck>>) = match spec.model {
        ScanModel::Exact => {
            let ops = CompositeOps::new(n_fock);
            probes
                .par_iter()
                .map(|&probe| exact_point(&ops, &params_at(spec, &base, probe), probe))
                .unzip()
        }
        ScanModel::Semiclassical => probes
            .par_iter()
            .map(|&probe| (mean_field_point(&params_at(spec, &base, probe), probe, opts), None))
            .unzip(),
    };
    let mut spectrum = Spectrum::new(records)?;
    spectrum.checks = checks;
    Ok(ScanOutcome { spectrum, n_fock })
}

fn exact_point(ops: &CompositeOps, p: &SystemParams, probe: f64) -> (ScanRecord, Option<PointCheck>) {
    let l = build_liouvillian_with(ops, p);
    let Ok(rho) = steady_state(&l) else {
        return (ScanRecord::failed(probe), None);
    };
    let (Ok(obs), Ok(diag)) = (observables(ops, &rho), StateDiagnostics::evaluate(&l, &rho)) else {
        return (ScanRecord::failed(probe), None);
    };
    let record = ScanRecord {
        probe,
        mean_n: obs.mean_n,
        s11: obs.s11,
        s22: obs.s22,
        s33: obs.s33,
        converged: true,
    };
    (record, Some((diag, rho.top_fock_population(p.n_fock)).into()))
}

/// Slow optical pumping (dark states near two-photon resonance) can outlast
/// the default horizon, so unfinished trajectories are continued with a
/// horizon ten times longer, up to [`MEAN_FIELD_EXTENSIONS`] times.
const MEAN_FIELD_EXTENSIONS: usize = 2;

fn mean_field_point(p: &SystemParams, probe: f64, opts: &ScanOptions) -> ScanRecord {
    let mut horizon = default_horizon(p);
    let mut result = integrate_to_steady(p, &MeanFieldState::ground(), horizon, opts.mean_field_tol);
    for _ in 0..MEAN_FIELD_EXTENSIONS {
        match &result {
            Ok(sol) if !sol.converged => {
                horizon *= 10.0;
                let start = sol.state;
                result = integrate_to_steady(p, &start, horizon, opts.mean_field_tol);
            }
            _ => break,
        }
    }
    match result {
        Ok(sol) => ScanRecord {
            probe,
            mean_n: sol.state.photon_number(),
            s11: sol.state.s11,
            s22: sol.state.s22,
            s33: sol.state.s33,
            converged: sol.converged,
        },
        Err(_) => ScanRecord::failed(probe),
    }
}

/// Runs a coarse pass at `params.n_fock`, then chooses the cutoff at the
/// probe value with the largest ⟨a†a⟩. The configured `n_fock` acts as a
/// lower bound.
pub fn select_cutoff(spec: &ScanSpec, params: &SystemParams, opts: &ScanOptions) -> Result<usize> {
    let coarse = ScanSpec {
        points: opts.coarse_points.clamp(2, spec.points.max(2)),
        model: ScanModel::Exact,
        ..*spec
    };
    let ops = CompositeOps::new(params.n_fock);
    let brightest = coarse
        .probes()
        .par_iter()
        .map(|&probe| (probe, exact_point(&ops, &params_at(&coarse, params, probe), probe).0))
        .filter(|(_, r)| r.converged)
        .max_by(|a, b| a.1.mean_n.total_cmp(&b.1.mean_n))
        .map(|(probe, _)| probe);
    let Some(probe) = brightest else {
        return Ok(params.n_fock);
    };
    let chosen = choose_cutoff(&params_at(&coarse, params, probe), opts.cutoff_tol)?;
    Ok(chosen.max(params.n_fock))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_mappings() {
        let d = ScanSpec::new(ScanScheme::Diagonal, 0.0, -1.0, 1.0, 3);
        assert_eq!(resolve_detunings(&d, 0.4), (-0.4, -0.4, -0.4));
        let d = ScanSpec::new(ScanScheme::Diagonal, 0.5, -1.0, 1.0, 3);
        assert_eq!(resolve_detunings(&d, 0.25), (0.25, -0.25, -0.25));
        let v = ScanSpec::new(ScanScheme::Vertical, 0.0, -1.0, 1.0, 3);
        assert_eq!(resolve_detunings(&v, 0.0), (0.0, 0.0, 0.0));
        assert_eq!(resolve_detunings(&v, 0.3), (-0.3, 0.0, 0.0));
        let mut h = ScanSpec::new(ScanScheme::Horizontal, -1.0, -1.0, 1.0, 3);
        h.atomic_splitting = 0.25;
        assert_eq!(resolve_detunings(&h, 0.3), (-1.0, -0.3, -0.55));
    }

    #[test]
    fn diagonal_and_vertical_meet_at_zero_probe() {
        let d = ScanSpec::new(ScanScheme::Diagonal, 0.0, -1.0, 1.0, 3);
        let v = ScanSpec::new(ScanScheme::Vertical, 0.0, -1.0, 1.0, 3);
        assert_eq!(resolve_detunings(&d, 0.0), resolve_detunings(&v, 0.0));
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let s = ScanSpec::new(ScanScheme::Diagonal, 0.0, -3.6, 3.6, 7);
        let p = s.probes();
        assert_eq!(p.len(), 7);
        assert_eq!(p[0], -3.6);
        assert_eq!(p[6], 3.6);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn spec_validation() {
        assert!(ScanSpec::new(ScanScheme::Diagonal, 0.0, 1.0, 1.0, 5).validate().is_err());
        assert!(ScanSpec::new(ScanScheme::Diagonal, 0.0, 0.0, 1.0, 1).validate().is_err());
        assert!(ScanSpec::new(ScanScheme::Diagonal, f64::NAN, 0.0, 1.0, 5).validate().is_err());
        assert!(ScanSpec::new(ScanScheme::Diagonal, 0.0, 0.0, 1.0, 2).validate().is_ok());
    }

    #[test]
    fn enum_parsing() {
        assert_eq!("vertical".parse::<ScanScheme>(), Ok(ScanScheme::Vertical));
        assert_eq!("semiclassical".parse::<ScanModel>(), Ok(ScanModel::Semiclassical));
        assert!("Diagonal".parse::<ScanScheme>().is_err());
        assert_eq!("s33".parse::<Column>(), Ok(Column::S33));
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![
            ScanRecord { probe: -0.1, mean_n: 1e-17, s11: 0.9, s22: 0.0, s33: 0.1, converged: true },
            ScanRecord { probe: 0.1, mean_n: 0.123456789012345, s11: 1.0 / 3.0, s22: 1.0 / 3.0, s33: 1.0 / 3.0, converged: false },
        ];
        let s = Spectrum::new(recs).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("probe,mean_n,s11,s22,s33,converged\n"));
        let back = Spectrum::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records, s.records);
    }

    #[test]
    fn malformed_csv() {
        assert!(Spectrum::read_csv("".as_bytes()).is_err());
        assert!(Spectrum::read_csv("probe,mean_n,s11,s22,s33,converged\n".as_bytes()).is_err());
        assert!(Spectrum::read_csv("x,y\n1,2\n".as_bytes()).is_err());
        let unordered = "probe,mean_n,s11,s22,s33,converged\n1,0,1,0,0,true\n0,0,1,0,0,true\n";
        assert!(Spectrum::read_csv(unordered.as_bytes()).is_err());
    }

    #[test]
    fn small_exact_scan_is_valid() {
        let p = SystemParams::two_level_defaults().with_n_fock(4);
        let spec = ScanSpec::new(ScanScheme::Diagonal, 0.0, -4.0, 4.0, 9);
        let out = run_scan(&spec, &p).unwrap();
        assert_eq!(out.spectrum.len(), 9);
        assert!(out.n_fock >= 4);
        for (r, c) in out.spectrum.records.iter().zip(&out.spectrum.checks) {
            assert!(r.converged);
            assert!(r.mean_n >= -1e-8);
            assert!((r.population_sum() - 1.0).abs() < 1e-8);
            assert!(c.unwrap().relative_residual < 1e-10);
        }
    }

    #[test]
    fn singular_points_become_failed_records() {
        let mut p = SystemParams::paper_defaults().with_n_fock(2);
        p.eta = 0.0;
        p.omega_free = 0.0;
        let spec = ScanSpec::new(ScanScheme::Diagonal, 0.0, -1.0, 1.0, 3);
        let out = run_scan_with(&spec, &p, &ScanOptions { fixed_cutoff: true, ..Default::default() }).unwrap();
        assert_eq!(out.spectrum.failures(), 3);
    }
}
