//! Python bindings for `lrsense`.
//!
//! Matrices cross the boundary as lists of rows. Experiment configs are
//! plain dicts layered over the defaults the CLI uses; results come back
//! as the same JSON structures the CLI writes to `report.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use lrsense_core::diagnostics::TruthHook;
use lrsense_core::experiments::config::{peek, resolve, Resolved};
use lrsense_core::experiments::{
    run_grid as grid, run_overfit_demo, run_rip_probe as rip_probe, run_scaling_study, Assertion, Axis, DemoConfig,
    GridConfig, Problem, RipConfig, ScalingConfig, STANDARD_SEED as SEED,
};
use lrsense_core::operators::{build_completion_operator, build_gaussian_operator, read_operator, write_operator};
use lrsense_core::recovery::{run_gd as gd, GdConfig};
use lrsense_core::validation::ValidationHook;
use lrsense_core::{rng, IterateHook, OperatorKind, RngSpec, SensingOperator, SymMatrix};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: lrsense_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: std::io::Error) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn user_table(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<toml::Table> {
    let Some(d) = config else {
        return Ok(toml::Table::new());
    };
    let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("config: {e}")))
}

fn load<T, F>(py: Python<'_>, config: Option<&Bound<'_, PyDict>>, defaults: F) -> PyResult<Resolved<T>>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce(&toml::Table) -> lrsense_core::Result<T>,
{
    let user = user_table(py, config)?;
    let d = defaults(&user).map_err(err)?;
    resolve(&d, user).map_err(err)
}

fn problem_of(user: &toml::Table) -> lrsense_core::Result<Problem> {
    Ok(peek(user, "problem")?.unwrap_or(Problem::Sensing))
}

#[derive(Serialize)]
struct Run<'a, C, R> {
    config: &'a C,
    defaults_used: &'a [String],
    assertions: Vec<Assertion>,
    passed: bool,
    result: R,
}

fn finish<C: Serialize, R: Serialize>(
    py: Python<'_>,
    resolved: &Resolved<C>,
    assertions: Vec<Assertion>,
    result: R,
) -> PyResult<Py<PyAny>> {
    let passed = assertions.iter().all(|a| a.passed);
    let run = Run {
        config: &resolved.config,
        defaults_used: &resolved.defaults_used,
        assertions,
        passed,
        result,
    };
    to_py(py, &run)
}

/// Planted PSD matrix `X = U Uᵀ` with unit Frobenius norm.
#[pyclass(name = "GroundTruth", module = "lrsense", frozen)]
struct PyGroundTruth {
    inner: lrsense_core::GroundTruth,
}

#[pymethods]
impl PyGroundTruth {
    #[new]
    fn new(n: usize, r_star: usize, seed: u64) -> PyResult<Self> {
        let inner =
            lrsense_core::generate_ground_truth(n, r_star, &RngSpec::new(seed, rng::GROUND_TRUTH)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn x(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.x_nat.as_matrix())
    }

    #[getter]
    fn factor(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.u_nat.as_matrix())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.true_rank
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn sigma_min(&self) -> f64 {
        self.inner.sigma_min
    }

    #[getter]
    fn sigma_max(&self) -> f64 {
        self.inner.sigma_max
    }

    fn __repr__(&self) -> String {
        format!(
            "GroundTruth(n={}, rank={}, kappa={:.3})",
            self.n(),
            self.rank(),
            self.kappa()
        )
    }
}

/// Linear measurement operator on symmetric `n x n` matrices.
#[pyclass(name = "Operator", module = "lrsense", frozen)]
struct PyOperator {
    inner: SensingOperator,
}

#[pymethods]
impl PyOperator {
    /// Dense operator with i.i.d. Gaussian sensing matrices.
    #[staticmethod]
    fn gaussian(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        let inner = build_gaussian_operator(n, m, &RngSpec::new(seed, rng::OPERATOR)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Entry-sampling mask of `m` distinct symmetric pairs.
    #[staticmethod]
    fn completion(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        let inner = build_completion_operator(n, m, &RngSpec::new(seed, rng::OPERATOR)).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let f = File::open(path).map_err(io_err)?;
        let inner = read_operator(BufReader::new(f)).map_err(err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(io_err)?;
        write_operator(&self.inner, BufWriter::new(f)).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            OperatorKind::DenseGaussian => "dense-gaussian",
            OperatorKind::CompletionMask => "completion-mask",
        }
    }

    /// Loss normalizer: `m` for dense operators, `m / n²` for masks.
    #[getter]
    fn normalization(&self) -> f64 {
        self.inner.normalization()
    }

    /// Entry pairs `(i, j)` of a mask, `None` for dense operators.
    fn pairs(&self) -> Option<Vec<(usize, usize)>> {
        self.inner.pairs().map(<[_]>::to_vec)
    }

    /// Measurements of a symmetric matrix.
    fn apply(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let z = SymMatrix::new(from_rows(&x)?).map_err(err)?;
        self.inner.apply(&z).map_err(err)
    }

    /// Symmetrized adjoint applied to a measurement vector.
    fn adjoint(&self, v: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(self.inner.adjoint(&v).map_err(err)?.as_matrix()))
    }

    fn __repr__(&self) -> String {
        format!("Operator(kind={}, n={}, m={})", self.kind(), self.n(), self.m())
    }
}

/// I.i.d. `N(0, sigma²)` noise vector.
#[pyfunction]
fn gaussian_noise(m: usize, sigma: f64, seed: u64) -> Vec<f64> {
    lrsense_core::gaussian_noise(m, sigma, &RngSpec::new(seed, rng::NOISE))
}

/// Factored gradient descent from a small random start.
///
/// Returns a dict with the recorded iterates, the final factor and, when
/// validation data is given, the iteration with the lowest validation loss.
#[pyfunction]
#[pyo3(signature = (
    op, y, r, eta, alpha, iterations, seed,
    record_every = 1, val_op = None, val_y = None, truth = None,
))]
#[allow(clippy::too_many_arguments)]
fn run_gd(
    py: Python<'_>,
    op: &PyOperator,
    y: Vec<f64>,
    r: usize,
    eta: f64,
    alpha: f64,
    iterations: usize,
    seed: u64,
    record_every: usize,
    val_op: Option<PyRef<'_, PyOperator>>,
    val_y: Option<Vec<f64>>,
    truth: Option<PyRef<'_, PyGroundTruth>>,
) -> PyResult<Py<PyAny>> {
    let mut config = GdConfig::new(r, eta, alpha, iterations, RngSpec::new(seed, rng::INIT));
    config.record_every = record_every;
    let mut val_hook = match (&val_op, &val_y) {
        (Some(o), Some(v)) => Some(ValidationHook::new(&o.inner, v)),
        (None, None) => None,
        _ => return Err(PyValueError::new_err("val_op and val_y must be given together")),
    };
    let mut truth_hook = truth.as_ref().map(|g| TruthHook::new(&g.inner));
    let mut hooks: Vec<&mut dyn IterateHook> = Vec::new();
    if let Some(h) = val_hook.as_mut() {
        hooks.push(h);
    }
    if let Some(h) = truth_hook.as_mut() {
        hooks.push(h);
    }
    let traj = gd(&op.inner, &y, &config, &mut hooks).map_err(err)?;

    #[derive(Serialize)]
    struct Out<'a> {
        records: &'a [lrsense_core::IterateRecord],
        final_factor: Vec<Vec<f64>>,
        best_val_iteration: Option<usize>,
    }
    let out = Out {
        records: &traj.records,
        final_factor: to_rows(traj.final_factor().as_matrix()),
        best_val_iteration: traj.best_val_iteration(),
    };
    to_py(py, &out)
}

/// Overfitting demo: one noisy trial with the full trajectory.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_demo(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let r = load(py, config, |u| Ok(DemoConfig::standard(problem_of(u)?)))?;
    let outcome = py.detach(|| run_overfit_demo(&r.config)).map_err(err)?;

    #[derive(Serialize)]
    struct Out<'a> {
        summary: &'a lrsense_core::experiments::DemoSummary,
        records: &'a [lrsense_core::IterateRecord],
    }
    let result = Out {
        summary: &outcome.summary,
        records: &outcome.trial.trajectory.records,
    };
    finish(py, &r, outcome.assertions(&r.config), result)
}

/// Recovery-error grid over ranks and noise levels.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_grid(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let r = load(py, config, |u| Ok(GridConfig::standard(problem_of(u)?)))?;
    let outcome = py.detach(|| grid(&r.config)).map_err(err)?;
    finish(py, &r, outcome.assertions(r.config.min_spearman), &outcome)
}

/// Scaling study along one axis with a log-log slope fit.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_scaling(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let r = load(py, config, |u| {
        Ok(ScalingConfig::standard(peek(u, "axis")?.unwrap_or(Axis::Sigma2)))
    })?;
    let outcome = py.detach(|| run_scaling_study(&r.config)).map_err(err)?;
    finish(py, &r, outcome.assertions(), &outcome)
}

/// Monte-Carlo restricted-isometry probe.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_rip_probe(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Py<PyAny>> {
    let r = load(py, config, |u| Ok(RipConfig::standard(problem_of(u)?)))?;
    let outcome = py.detach(|| rip_probe(&r.config)).map_err(err)?;
    finish(py, &r, outcome.assertions(), outcome.summary())
}

#[pymodule]
fn lrsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("STANDARD_SEED", SEED)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGroundTruth>()?;
    m.add_class::<PyOperator>()?;
    m.add_function(wrap_pyfunction!(gaussian_noise, m)?)?;
    m.add_function(wrap_pyfunction!(run_gd, m)?)?;
    m.add_function(wrap_pyfunction!(run_demo, m)?)?;
    m.add_function(wrap_pyfunction!(run_grid, m)?)?;
    m.add_function(wrap_pyfunction!(run_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(run_rip_probe, m)?)?;
    Ok(())
}
