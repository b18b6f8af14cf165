use fnnsel::criteria::oos_mse;
use fnnsel::data::{self, Dataset};
use fnnsel::error::Error;
use fnnsel::model::{self, Architecture};
use fnnsel::selector::{self, candidate_seed, Objective, SelectionConfig, StepStatus, Strategy};
use fnnsel::simlab::{self, CovariateLaw, SimulationConfig, TrueModelSpec};
use fnnsel::trainer::{self, FitConfig, FittedModel};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn fit_config(n_init: usize, max_iter: usize, grad_tol: f64, init_range: f64, seed: u64) -> FitConfig {
    FitConfig { n_init, max_iterations: max_iter, gradient_tolerance: grad_tol, init_range, seed }
}

#[pyclass(name = "Dataset", module = "fnnsel_py", frozen)]
struct PyDataset(Dataset);

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (rows, y, names=None, response="y"))]
    fn new(rows: Vec<Vec<f64>>, y: Vec<f64>, names: Option<Vec<String>>, response: &str) -> PyResult<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = names.unwrap_or_else(|| (1..=p).map(|j| format!("x{j}")).collect());
        Dataset::from_rows(names, response, &rows, y).map(Self).map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.0.covariate_names().to_vec()
    }

    #[getter]
    fn response_name(&self) -> &str {
        self.0.response_name()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    fn response(&self) -> Vec<f64> {
        self.0.response().to_vec()
    }

    /// Seeded (train, test) partition; both parts keep the row order.
    fn split(&self, test_fraction: f64, seed: u64) -> PyResult<(Self, Self)> {
        let (train, test) = data::split(&self.0, test_fraction, seed).map_err(py_err)?;
        Ok((Self(train), Self(test)))
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, p={}, response={:?})", self.0.n(), self.0.p(), self.0.response_name())
    }
}

#[pyfunction]
fn load_csv(path: &str, response: &str) -> PyResult<PyDataset> {
    data::load_csv(path, response).map(|l| PyDataset(l.dataset)).map_err(py_err)
}

#[pyfunction]
fn load_bundled(name: &str) -> PyResult<PyDataset> {
    data::load_bundled(name).map(|l| PyDataset(l.dataset)).map_err(py_err)
}

/// Min-max rescaling fitted on `train` and applied to `train` and `test`.
#[pyfunction]
fn scale(train: &PyDataset, test: &PyDataset) -> PyResult<(PyDataset, PyDataset)> {
    let scaler = data::fit_scaler(&train.0).map_err(py_err)?;
    let a = data::apply_scaler(&scaler, &train.0).map_err(py_err)?;
    let b = data::apply_scaler(&scaler, &test.0).map_err(py_err)?;
    Ok((PyDataset(a), PyDataset(b)))
}

#[pyfunction]
fn param_count(p: usize, q: usize) -> PyResult<usize> {
    model::param_count(p, q).map_err(py_err)
}

#[pyclass(name = "FittedModel", module = "fnnsel_py", frozen)]
struct PyFittedModel(FittedModel);

#[pymethods]
impl PyFittedModel {
    #[getter]
    fn inputs(&self) -> Vec<usize> {
        self.0.arch.inputs().to_vec()
    }

    #[getter]
    fn q(&self) -> usize {
        self.0.arch.q()
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.summary.k
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.summary.n
    }

    #[getter]
    fn rss(&self) -> f64 {
        self.0.summary.rss
    }

    #[getter]
    fn sigma2_hat(&self) -> f64 {
        self.0.summary.sigma2_hat
    }

    #[getter]
    fn log_lik(&self) -> f64 {
        self.0.summary.log_lik
    }

    #[getter]
    fn bic(&self) -> f64 {
        self.0.summary.bic
    }

    #[getter]
    fn aic(&self) -> f64 {
        self.0.summary.aic
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta_hat.as_slice().to_vec()
    }

    #[getter]
    fn termination(&self) -> String {
        format!("{:?}", self.0.diagnostics.termination)
    }

    #[getter]
    fn gradient_sup_norm(&self) -> f64 {
        self.0.diagnostics.gradient_sup_norm
    }

    #[getter]
    fn starts_converged(&self) -> usize {
        self.0.starts_converged
    }

    fn predict(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        model::predict_batch(&self.0.arch, &self.0.theta_hat, &data.0).map_err(py_err)
    }

    fn oos_mse(&self, holdout: &PyDataset) -> PyResult<f64> {
        oos_mse(&self.0, &holdout.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("FittedModel({}, k={}, bic={})", self.0.arch, self.0.summary.k, self.0.summary.bic)
    }
}

/// Multi-start fit of one architecture. The start stream is keyed by `seed`
/// and the architecture, as in `select`.
#[pyfunction]
#[pyo3(signature = (data, inputs, q, n_init=10, max_iter=100, grad_tol=1e-6, init_range=0.7, seed=1))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: &PyDataset,
    inputs: Vec<usize>,
    q: usize,
    n_init: usize,
    max_iter: usize,
    grad_tol: f64,
    init_range: f64,
    seed: u64,
) -> PyResult<PyFittedModel> {
    let arch = Architecture::new(inputs, q).map_err(py_err)?;
    arch.check_inputs(data.0.p()).map_err(py_err)?;
    let cfg = fit_config(n_init, max_iter, grad_tol, init_range, candidate_seed(seed, &arch));
    py.detach(|| trainer::fit(&arch, &data.0, &cfg)).map(PyFittedModel).map_err(py_err)
}

/// (phase, round, inputs, q, objective, status) per evaluated candidate.
type TraceRow = (String, usize, Vec<usize>, usize, Option<f64>, String);

#[pyclass(name = "Selection", module = "fnnsel_py", frozen)]
struct PySelection {
    #[pyo3(get)]
    model: Py<PyFittedModel>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    fits: usize,
    #[pyo3(get)]
    trace: Vec<TraceRow>,
}

#[pyfunction]
#[pyo3(signature = (
    data, q_max=10, objective="bic", strategy="hif", validation_fraction=0.2, input_first_q=None,
    n_init=10, max_iter=100, grad_tol=1e-6, init_range=0.7, seed=1,
))]
#[allow(clippy::too_many_arguments)]
fn select(
    py: Python<'_>,
    data: &PyDataset,
    q_max: usize,
    objective: &str,
    strategy: &str,
    validation_fraction: f64,
    input_first_q: Option<usize>,
    n_init: usize,
    max_iter: usize,
    grad_tol: f64,
    init_range: f64,
    seed: u64,
) -> PyResult<PySelection> {
    let cfg = SelectionConfig {
        q_max,
        objective: objective.parse::<Objective>().map_err(py_err)?,
        strategy: strategy.parse::<Strategy>().map_err(py_err)?,
        fit_config: fit_config(n_init, max_iter, grad_tol, init_range, seed),
        validation_fraction,
        input_first_q,
    };
    let out = py.detach(|| selector::select(&data.0, &cfg)).map_err(py_err)?;
    let trace = out
        .trace
        .steps
        .iter()
        .map(|s| {
            let status = match &s.status {
                StepStatus::Accepted => "accepted".to_string(),
                StepStatus::Rejected => "rejected".to_string(),
                StepStatus::Failed(m) => format!("failed: {m}"),
            };
            (s.phase.label().to_string(), s.round, s.arch.inputs().to_vec(), s.arch.q(), s.objective, status)
        })
        .collect();
    Ok(PySelection {
        model: Py::new(py, PyFittedModel(out.model))?,
        objective: out.objective,
        fits: out.fits,
        trace,
    })
}

/// Draws a true network and `n` rows from it.
#[pyfunction]
#[pyo3(signature = (n, seed, p_important=3, p_noise=10, q_true=3, noise_sd=0.7, covariates="normal"))]
fn simulate_dataset(
    n: usize,
    seed: u64,
    p_important: usize,
    p_noise: usize,
    q_true: usize,
    noise_sd: f64,
    covariates: &str,
) -> PyResult<PyDataset> {
    let spec = generator(p_important, p_noise, q_true, noise_sd, covariates)?;
    let truth = spec.generate(seed).map_err(py_err)?;
    simlab::simulate_dataset(&truth, n, seed.wrapping_add(1)).map(PyDataset).map_err(py_err)
}

fn generator(p_important: usize, p_noise: usize, q_true: usize, noise_sd: f64, covariates: &str) -> PyResult<TrueModelSpec> {
    let covariates = match covariates {
        "normal" => CovariateLaw::StandardNormal,
        "uniform" => CovariateLaw::Uniform01,
        other => return Err(PyValueError::new_err(format!("unknown covariate law `{other}`"))),
    };
    Ok(TrueModelSpec { p_important, p_noise, q_true, noise_sd, covariates, ..Default::default() })
}

/// Replicate study; returns the aggregate and per-replicate records.
#[pyfunction]
#[pyo3(signature = (
    n=1000, replicates=100, seed=1, q_max=10, objective="bic", strategy="hif", n_init=10, max_iter=100,
    p_important=3, p_noise=10, q_true=3, noise_sd=0.7, covariates="normal",
))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    replicates: usize,
    seed: u64,
    q_max: usize,
    objective: &str,
    strategy: &str,
    n_init: usize,
    max_iter: usize,
    p_important: usize,
    p_noise: usize,
    q_true: usize,
    noise_sd: f64,
    covariates: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = SimulationConfig {
        n,
        replicates,
        seed,
        generator: generator(p_important, p_noise, q_true, noise_sd, covariates)?,
        selection: SelectionConfig {
            q_max,
            objective: objective.parse::<Objective>().map_err(py_err)?,
            strategy: strategy.parse::<Strategy>().map_err(py_err)?,
            fit_config: FitConfig { n_init, max_iterations: max_iter, ..Default::default() },
            ..Default::default()
        },
    };
    let report = py.detach(|| simlab::run_replicates(&cfg)).map_err(py_err)?;
    let a = &report.aggregate;
    let out = PyDict::new(py);
    out.set_item("completed", a.completed)?;
    out.set_item("failed", a.failed)?;
    out.set_item("c_mean", a.c_mean)?;
    out.set_item("pi", a.pi)?;
    out.set_item("ph", a.ph)?;
    out.set_item("pt", a.pt)?;
    out.set_item("median_k", a.median_k)?;
    out.set_item("median_test_mse", a.median_test_mse)?;
    out.set_item("median_time", a.median_time)?;
    let mut records = Vec::with_capacity(report.records.len());
    for rec in &report.records {
        let d = PyDict::new(py);
        d.set_item("index", rec.index)?;
        match &rec.outcome {
            Ok(m) => {
                d.set_item("inputs", m.selected.inputs().to_vec())?;
                d.set_item("q", m.selected.q())?;
                d.set_item("k", m.k)?;
                d.set_item("c", m.recovery.c)?;
                d.set_item("pt_hit", m.recovery.pt_hit)?;
                d.set_item("bic", m.bic)?;
                d.set_item("test_mse", m.test_mse)?;
            }
            Err(e) => d.set_item("error", e)?,
        }
        records.push(d);
    }
    out.set_item("replicates", records)?;
    Ok(out)
}

#[pymodule]
pub fn fnnsel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFittedModel>()?;
    m.add_class::<PySelection>()?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(load_bundled, m)?)?;
    m.add_function(wrap_pyfunction!(scale, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
