use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lambda_cqed::analysis::find_peaks_xy;
use lambda_cqed::dressed::{self, MultiphotonModel};
use lambda_cqed::params::{self, SystemParams};
use lambda_cqed::scan::{run_scan_with, ScanModel, ScanOptions, ScanScheme, ScanSpec};
use lambda_cqed::semiclassical::{default_horizon, integrate_to_steady, MeanFieldState};
use lambda_cqed::{lindblad, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::CutoffNotConverged { .. } | Error::SingularSystem(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "SystemParams", module = "lambda_cqed", from_py_object)]
#[derive(Clone)]
struct PySystemParams {
    inner: SystemParams,
}

#[pymethods]
impl PySystemParams {
    /// Keyword arguments override the strongly coupled defaults.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = SystemParams::paper_defaults();
        if let Some(kwargs) = kwargs {
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                if key == "n_fock" {
                    p.n_fock = value.extract()?;
                    continue;
                }
                let v: f64 = value.extract()?;
                let slot = match key.as_str() {
                    "g" => &mut p.g,
                    "omega_free" => &mut p.omega_free,
                    "eta" => &mut p.eta,
                    "kappa" => &mut p.kappa,
                    "gamma31" => &mut p.gamma31,
                    "gamma32" => &mut p.gamma32,
                    "gamma21" => &mut p.gamma21,
                    "delta_c" => &mut p.delta_c,
                    "delta_1" => &mut p.delta_1,
                    "delta_2" => &mut p.delta_2,
                    _ => return Err(PyValueError::new_err(format!("unknown parameter `{key}`"))),
                };
                *slot = v;
            }
        }
        p.validate().map_err(to_py)?;
        Ok(Self { inner: p })
    }

    #[staticmethod]
    fn paper_defaults() -> Self {
        Self {
            inner: SystemParams::paper_defaults(),
        }
    }

    #[staticmethod]
    fn two_level_defaults() -> Self {
        Self {
            inner: SystemParams::two_level_defaults(),
        }
    }

    #[staticmethod]
    fn from_config(path: &str) -> PyResult<Self> {
        SystemParams::from_config_file(path)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn g(&self) -> f64 {
        self.inner.g
    }

    #[getter]
    fn omega_free(&self) -> f64 {
        self.inner.omega_free
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn gamma31(&self) -> f64 {
        self.inner.gamma31
    }

    #[getter]
    fn gamma32(&self) -> f64 {
        self.inner.gamma32
    }

    #[getter]
    fn gamma21(&self) -> f64 {
        self.inner.gamma21
    }

    #[getter]
    fn delta_c(&self) -> f64 {
        self.inner.delta_c
    }

    #[getter]
    fn delta_1(&self) -> f64 {
        self.inner.delta_1
    }

    #[getter]
    fn delta_2(&self) -> f64 {
        self.inner.delta_2
    }

    #[getter]
    fn n_fock(&self) -> usize {
        self.inner.n_fock
    }

    fn with_detunings(&self, delta_c: f64, delta_1: f64, delta_2: f64) -> Self {
        Self {
            inner: self.inner.with_detunings(delta_c, delta_1, delta_2),
        }
    }

    fn with_n_fock(&self, n_fock: usize) -> Self {
        Self {
            inner: self.inner.with_n_fock(n_fock),
        }
    }

    fn cooperativity(&self) -> PyResult<f64> {
        params::cooperativity(&self.inner).map_err(to_py)
    }

    fn to_config(&self) -> String {
        self.inner.to_config_string()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "SystemParams(g={}, omega_free={}, eta={}, kappa={}, gamma31={}, gamma32={}, gamma21={}, \
             delta_c={}, delta_1={}, delta_2={}, n_fock={})",
            p.g, p.omega_free, p.eta, p.kappa, p.gamma31, p.gamma32, p.gamma21, p.delta_c, p.delta_1, p.delta_2, p.n_fock
        )
    }
}

/// Steady-state observables of the full master equation at one point.
#[pyfunction]
fn solve_point<'py>(py: Python<'py>, params: &PySystemParams) -> PyResult<Bound<'py, PyDict>> {
    let (_, obs) = lindblad::solve_point(&params.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean_n", obs.mean_n)?;
    d.set_item("s11", obs.s11)?;
    d.set_item("s22", obs.s22)?;
    d.set_item("s33", obs.s33)?;
    d.set_item("field", (obs.field.re, obs.field.im))?;
    Ok(d)
}

/// Smallest Fock cutoff at which the point is converged to `tol`.
#[pyfunction]
#[pyo3(signature = (params, tol = 1e-6))]
fn choose_cutoff(params: &PySystemParams, tol: f64) -> PyResult<usize> {
    lindblad::choose_cutoff(&params.inner, tol).map_err(to_py)
}

/// Mean-field steady state reached from the ground state.
#[pyfunction]
#[pyo3(signature = (params, tol = 1e-9))]
fn mean_field<'py>(py: Python<'py>, params: &PySystemParams, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = &params.inner;
    let sol = integrate_to_steady(p, &MeanFieldState::ground(), default_horizon(p), tol).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mean_n", sol.state.photon_number())?;
    d.set_item("s11", sol.state.s11)?;
    d.set_item("s22", sol.state.s22)?;
    d.set_item("s33", sol.state.s33)?;
    d.set_item("field", (sol.state.a.re, sol.state.a.im))?;
    d.set_item("converged", sol.converged)?;
    Ok(d)
}

/// Sweeps the probe along one scan line. Returns a dict of equal-length
/// lists plus the Fock cutoff that was used.
#[pyfunction]
#[pyo3(signature = (params, scheme, probe_from, probe_to, points, offset = 0.0, model = "exact", fixed_cutoff = false))]
#[allow(clippy::too_many_arguments)]
fn run_scan<'py>(
    py: Python<'py>,
    params: &PySystemParams,
    scheme: &str,
    probe_from: f64,
    probe_to: f64,
    points: usize,
    offset: f64,
    model: &str,
    fixed_cutoff: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme: ScanScheme = scheme.parse().map_err(PyValueError::new_err)?;
    let model: ScanModel = model.parse().map_err(PyValueError::new_err)?;
    let spec = ScanSpec::new(scheme, offset, probe_from, probe_to, points).with_model(model);
    let opts = ScanOptions {
        fixed_cutoff,
        ..ScanOptions::default()
    };
    let inner = params.inner;
    let outcome = py.detach(|| run_scan_with(&spec, &inner, &opts)).map_err(to_py)?;
    let records = &outcome.spectrum.records;
    let d = PyDict::new(py);
    d.set_item("probe", records.iter().map(|r| r.probe).collect::<Vec<_>>())?;
    d.set_item("mean_n", records.iter().map(|r| r.mean_n).collect::<Vec<_>>())?;
    d.set_item("s11", records.iter().map(|r| r.s11).collect::<Vec<_>>())?;
    d.set_item("s22", records.iter().map(|r| r.s22).collect::<Vec<_>>())?;
    d.set_item("s33", records.iter().map(|r| r.s33).collect::<Vec<_>>())?;
    d.set_item("converged", records.iter().map(|r| r.converged).collect::<Vec<_>>())?;
    d.set_item("n_fock", outcome.n_fock)?;
    Ok(d)
}

/// (branch, energy, [(re, im); 3])
type LevelTuple = (String, f64, Vec<(f64, f64)>);

/// Numerically diagonalized n-th manifold, ascending in energy.
#[pyfunction]
fn dressed_levels(n: usize, params: &PySystemParams) -> Vec<LevelTuple> {
    dressed::dressed_states_general(n, &params.inner)
        .iter()
        .map(|l| {
            (
                l.branch.as_str().to_string(),
                l.energy,
                l.amplitudes.iter().map(|c| (c.re, c.im)).collect(),
            )
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (n_max, params, model = "two_level"))]
fn multiphoton_peak_positions(n_max: usize, params: &PySystemParams, model: &str) -> PyResult<Vec<f64>> {
    let model = match model {
        "two_level" => MultiphotonModel::TwoLevel,
        "three_level" => MultiphotonModel::ThreeLevel,
        other => return Err(PyValueError::new_err(format!("unknown model `{other}`"))),
    };
    Ok(dressed::multiphoton_peak_positions(n_max, &params.inner, model))
}

#[pyfunction]
fn raman_peak_positions(n_max: usize, eta: f64) -> Vec<f64> {
    dressed::raman_peak_positions(n_max, eta)
}

/// Peaks as (position, height, width, prominence) tuples.
#[pyfunction]
#[pyo3(signature = (x, y, min_prominence = 0.0))]
fn find_peaks(x: Vec<f64>, y: Vec<f64>, min_prominence: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!("x has {} samples but y has {}", x.len(), y.len())));
    }
    Ok(find_peaks_xy(&x, &y, min_prominence)
        .into_iter()
        .map(|p| (p.position, p.height, p.width, p.prominence))
        .collect())
}

#[pymodule]
#[pyo3(name = "lambda_cqed")]
fn lambda_cqed_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_function(wrap_pyfunction!(solve_point, m)?)?;
    m.add_function(wrap_pyfunction!(choose_cutoff, m)?)?;
    m.add_function(wrap_pyfunction!(mean_field, m)?)?;
    m.add_function(wrap_pyfunction!(run_scan, m)?)?;
    m.add_function(wrap_pyfunction!(dressed_levels, m)?)?;
    m.add_function(wrap_pyfunction!(multiphoton_peak_positions, m)?)?;
    m.add_function(wrap_pyfunction!(raman_peak_positions, m)?)?;
    m.add_function(wrap_pyfunction!(find_peaks, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
