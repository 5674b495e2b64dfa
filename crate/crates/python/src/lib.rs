//! Python module `zoss`: loss models, the smoothed gradient estimator,
//! bound calculators and the coupled experiments. Reports come back as
//! plain dicts (the same JSON the CLI writes).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use zoss_core::bounds::{self, BoundInputs};
use zoss_core::estimator::{self, PerturbationStream, SmoothedGradientParams};
use zoss_core::harness::{self, DatasetSpec};
use zoss_core::optimizers::{Algorithm, RunConfig};
use zoss_core::{report, Example, Schedule, ScheduleKind, ZossError};

fn py_err(e: ZossError) -> PyErr {
    match e {
        ZossError::InvalidArgument(_) | ZossError::UnknownModel(_) | ZossError::Config(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = report::to_json(v).map_err(py_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "LossModel", module = "zoss", frozen)]
struct PyLossModel {
    inner: zoss_core::LossModel,
}

#[pymethods]
impl PyLossModel {
    /// `name` is one of `registered_losses()`.
    #[new]
    #[pyo3(signature = (name, dim, radius = 1.0))]
    fn new(name: &str, dim: usize, radius: f64) -> PyResult<Self> {
        Ok(Self {
            inner: zoss_core::LossModel::from_name(name, dim, radius).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    #[getter]
    fn smoothness(&self) -> f64 {
        self.inner.smoothness()
    }

    #[getter]
    fn convex(&self) -> bool {
        self.inner.convex()
    }

    #[getter]
    fn bounded01(&self) -> bool {
        self.inner.bounded01()
    }

    fn evaluate(&self, w: Vec<f64>, features: Vec<f64>, label: f64) -> PyResult<f64> {
        self.check(&w, &features)?;
        Ok(self.inner.evaluate(&w, &Example::new(features, label)))
    }

    fn gradient(&self, w: Vec<f64>, features: Vec<f64>, label: f64) -> PyResult<Vec<f64>> {
        self.check(&w, &features)?;
        Ok(self.inner.gradient(&w, &Example::new(features, label)))
    }

    /// Smoothed gradient from `K + 1` evaluations along the stream `(seed, replica, t)`.
    #[pyo3(signature = (w, features, label, k, mu, seed = 42, replica = 0, t = 0))]
    #[allow(clippy::too_many_arguments)]
    fn smoothed_gradient(
        &self,
        w: Vec<f64>,
        features: Vec<f64>,
        label: f64,
        k: usize,
        mu: f64,
        seed: u64,
        replica: u64,
        t: u64,
    ) -> PyResult<Vec<f64>> {
        self.check(&w, &features)?;
        let params = SmoothedGradientParams::new(k, mu).map_err(py_err)?;
        let z = Example::new(features, label);
        estimator::smoothed_gradient(&self.inner, &w, &z, &params, &PerturbationStream::new(seed, replica, t))
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "LossModel(name={:?}, dim={}, L={}, beta={})",
            self.inner.name(),
            self.inner.dim(),
            self.inner.lipschitz(),
            self.inner.smoothness()
        )
    }
}

impl PyLossModel {
    fn check(&self, w: &[f64], x: &[f64]) -> PyResult<()> {
        let d = self.inner.dim();
        if w.len() != d || x.len() != d {
            return Err(PyValueError::new_err(format!("expected vectors of length {d}")));
        }
        Ok(())
    }
}

#[pyfunction]
fn registered_losses() -> Vec<&'static str> {
    zoss_core::LossModel::REGISTERED.to_vec()
}

/// `Γ = √((3d−1)/K) + 1`; `k = None` is the infinite-query limit.
#[pyfunction]
#[pyo3(signature = (d, k = None))]
fn gamma(d: usize, k: Option<usize>) -> PyResult<f64> {
    zoss_core::schedule::gamma_opt(d, k).map_err(py_err)
}

#[pyfunction]
fn mu_cap(c: f64, l: f64, gamma: f64, n: usize, beta: f64, d: usize) -> PyResult<f64> {
    zoss_core::mu_cap(c, l, gamma, n, beta, d).map_err(py_err)
}

fn kind(name: &str) -> PyResult<ScheduleKind> {
    name.parse().map_err(py_err)
}

/// Step sizes `α_1 … α_T`.
#[pyfunction]
#[pyo3(signature = (schedule, c, t, beta, d, k = None))]
fn schedule_values(schedule: &str, c: f64, t: usize, beta: f64, d: usize, k: Option<usize>) -> PyResult<Vec<f64>> {
    Ok(Schedule::new(kind(schedule)?, c, t, beta, d, k)
        .map_err(py_err)?
        .values())
}

#[allow(clippy::too_many_arguments)]
fn inputs(
    l: f64,
    beta: f64,
    n: usize,
    t: usize,
    d: usize,
    k: Option<usize>,
    c_step: f64,
    c_cap: f64,
    mu: Option<f64>,
    m: usize,
) -> PyResult<BoundInputs> {
    let i = BoundInputs::new(l, beta, n, t, d, k, c_step)
        .with_cap(c_cap)
        .with_batch(m);
    let i = match mu {
        Some(mu) => i.with_mu(mu),
        None => i.with_mu_at_cap(),
    };
    i.validate().map_err(py_err)?;
    Ok(i)
}

/// Every tabulated generalization bound with its SGD limit.
#[pyfunction]
#[pyo3(signature = (l, beta, n, t, d, k, c_step, c_cap, mu = None, m = 1))]
#[allow(clippy::too_many_arguments)]
fn table1<'py>(
    py: Python<'py>,
    l: f64,
    beta: f64,
    n: usize,
    t: usize,
    d: usize,
    k: Option<usize>,
    c_step: f64,
    c_cap: f64,
    mu: Option<f64>,
    m: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let i = inputs(l, beta, n, t, d, k, c_step, c_cap, mu, m)?;
    to_py(py, &bounds::table1(&i).map_err(py_err)?)
}

/// Generalization bound for a schedule and loss class.
#[pyfunction]
#[pyo3(signature = (schedule, l, beta, n, t, d, k, c_step, c_cap, bounded01, convex, mu = None))]
#[allow(clippy::too_many_arguments)]
fn generalization_bound<'py>(
    py: Python<'py>,
    schedule: &str,
    l: f64,
    beta: f64,
    n: usize,
    t: usize,
    d: usize,
    k: Option<usize>,
    c_step: f64,
    c_cap: f64,
    bounded01: bool,
    convex: bool,
    mu: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let i = inputs(l, beta, n, t, d, k, c_step, c_cap, mu, 1)?;
    to_py(
        py,
        &bounds::generalization_bound(&i, kind(schedule)?, bounded01, convex).map_err(py_err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (d, k, v, n_mc = 100_000, seed = 42))]
fn verify_variance_reduction<'py>(
    py: Python<'py>,
    d: usize,
    k: usize,
    v: Vec<f64>,
    n_mc: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| estimator::verify_variance_reduction(d, k, &v, n_mc, seed))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (d, n_mc = 100_000, seed = 42))]
fn verify_third_moment<'py>(py: Python<'py>, d: usize, n_mc: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| estimator::verify_third_moment(d, n_mc, seed))
        .map_err(py_err)?;
    to_py(py, &r)
}

struct Experiment {
    model: zoss_core::LossModel,
    spec: DatasetSpec,
    config: RunConfig,
}

#[allow(clippy::too_many_arguments)]
fn experiment(
    loss: &str,
    d: usize,
    radius: f64,
    n: usize,
    t: usize,
    k: usize,
    algorithm: &str,
    schedule: &str,
    c_step: f64,
    c_cap: f64,
    mu: Option<f64>,
    m: Option<usize>,
    seed: u64,
) -> PyResult<Experiment> {
    let model = zoss_core::LossModel::from_name(loss, d, radius).map_err(py_err)?;
    let algorithm: Algorithm = algorithm.parse().map_err(py_err)?;
    let zoss = algorithm == Algorithm::Zoss;
    let sched = Schedule::new(kind(schedule)?, c_step, t, model.smoothness(), d, zoss.then_some(k)).map_err(py_err)?;
    let (mu, cap) = if zoss {
        let g = zoss_core::gamma(d, k).map_err(py_err)?;
        let cap = zoss_core::mu_cap(c_cap, model.lipschitz(), g, n, model.smoothness(), d).map_err(py_err)?;
        (mu.unwrap_or(cap / 2.0), Some(cap))
    } else {
        (mu.unwrap_or(0.0), None)
    };
    let config = RunConfig {
        loss: loss.into(),
        dataset_id: String::new(),
        k,
        mu,
        m: m.unwrap_or(if algorithm == Algorithm::Gd { n } else { 1 }),
        t_total: t,
        schedule: sched,
        master_seed: seed,
        algorithm,
        cap_c: c_cap,
        mu_cap: cap,
        t0: 0,
    };
    config.validate(n).map_err(py_err)?;
    Ok(Experiment {
        model,
        spec: DatasetSpec::ball(d, radius),
        config,
    })
}

/// Coupled runs at each swap position (default 1, n/2, n) against the stability bound.
#[pyfunction]
#[pyo3(signature = (
    loss = "sigmoid01", d = 5, radius = 1.0, n = 20, t = 50, k = 4, algorithm = "zoss",
    schedule = "decreasing-over-gamma", c_step = 0.5, c_cap = 0.5, mu = None, m = None,
    replicas = 200, swap = None, seed = 42
))]
#[allow(clippy::too_many_arguments)]
fn run_stability<'py>(
    py: Python<'py>,
    loss: &str,
    d: usize,
    radius: f64,
    n: usize,
    t: usize,
    k: usize,
    algorithm: &str,
    schedule: &str,
    c_step: f64,
    c_cap: f64,
    mu: Option<f64>,
    m: Option<usize>,
    replicas: usize,
    swap: Option<Vec<usize>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = experiment(
        loss, d, radius, n, t, k, algorithm, schedule, c_step, c_cap, mu, m, seed,
    )?;
    let swaps = swap.unwrap_or_else(|| harness::default_swap_indices(n));
    let r = py
        .detach(|| -> zoss_core::Result<_> {
            let base = harness::generate_dataset(&e.spec, n, seed)?;
            harness::run_stability_over_swaps(&e.model, &base, &e.config, &swaps, replicas, seed)
        })
        .map_err(py_err)?;
    to_py(py, &r)
}

/// Train/test gap over fresh samples against the generalization bound.
#[pyfunction]
#[pyo3(signature = (
    loss = "sigmoid01", d = 5, radius = 1.0, n = 20, t = 50, k = 4, algorithm = "zoss",
    schedule = "decreasing-over-gamma", c_step = 0.5, c_cap = 0.5, mu = None, m = None,
    replicas = 100, test_size = 1000, seed = 42
))]
#[allow(clippy::too_many_arguments)]
fn run_generalization<'py>(
    py: Python<'py>,
    loss: &str,
    d: usize,
    radius: f64,
    n: usize,
    t: usize,
    k: usize,
    algorithm: &str,
    schedule: &str,
    c_step: f64,
    c_cap: f64,
    mu: Option<f64>,
    m: Option<usize>,
    replicas: usize,
    test_size: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = experiment(
        loss, d, radius, n, t, k, algorithm, schedule, c_step, c_cap, mu, m, seed,
    )?;
    let r = py
        .detach(|| harness::run_generalization(&e.model, &e.config, &e.spec, n, replicas, test_size))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pymodule]
fn zoss(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", zoss_core::VERSION)?;
    m.add_class::<PyLossModel>()?;
    m.add_function(wrap_pyfunction!(registered_losses, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(mu_cap, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_values, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_variance_reduction, m)?)?;
    m.add_function(wrap_pyfunction!(verify_third_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_stability, m)?)?;
    m.add_function(wrap_pyfunction!(run_generalization, m)?)?;
    Ok(())
}
