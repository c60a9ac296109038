//! Python bindings for the mwstab simulator.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mwstab::adversary::{AdversaryParams, ExponentialAdversary, FixedLoad};
use mwstab::auditor::{self, compute_bound_constants, AuditMode, BoundParams};
use mwstab::engine::{run, stability_verdict, RunOptions, DEFAULT_PLATEAU_FACTOR, DEFAULT_SLOPE_THRESHOLD};
use mwstab::model::{self, NetworkSpec, QueueMatrix, RateSet};
use mwstab::scheduler::{max_weight_approx, max_weight_exact, ApproxParams};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Directed network with per-destination queues.
#[pyclass(name = "Network", module = "mwstab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyNetwork {
    inner: NetworkSpec,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (nodes, edges, destinations, r_min, r_max, beta = 1.0))]
    fn new(
        nodes: usize,
        edges: Vec<(usize, usize)>,
        destinations: Vec<usize>,
        r_min: f64,
        r_max: f64,
        beta: f64,
    ) -> PyResult<Self> {
        let inner = NetworkSpec::new(nodes, edges, destinations, beta, r_min, r_max).map_err(value_err)?;
        Ok(PyNetwork { inner })
    }

    /// The parallel-edge network used by the lower-bound construction.
    #[staticmethod]
    fn exponential(n: usize, eps: f64) -> PyResult<Self> {
        let inner = mwstab::adversary::exponential_network(n, eps).map_err(value_err)?;
        Ok(PyNetwork { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn destinations(&self) -> Vec<usize> {
        self.inner.destinations().to_vec()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, edges={}, destinations={:?}, beta={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            self.inner.destinations(),
            self.inner.beta()
        )
    }
}

/// Feasible edge-rate vectors for one slot.
#[pyclass(name = "RateSet", module = "mwstab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyRateSet {
    inner: RateSet,
}

#[pymethods]
impl PyRateSet {
    /// A finite list of rate vectors.
    #[staticmethod]
    fn explicit(vectors: Vec<Vec<f64>>) -> Self {
        PyRateSet {
            inner: RateSet::explicit(vectors),
        }
    }

    /// Any set of node-disjoint edges, each at its cap.
    #[staticmethod]
    fn matching(caps: Vec<f64>) -> Self {
        PyRateSet {
            inner: RateSet::matching(caps),
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn queues(net: &PyNetwork, rows: Vec<Vec<f64>>) -> PyResult<QueueMatrix> {
    QueueMatrix::from_rows(&net.inner, &rows).map_err(value_err)
}

/// Potential sum of q^(beta+1) over all queues.
#[pyfunction]
fn potential(net: &PyNetwork, rows: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(model::potential(&queues(net, rows)?, net.inner.beta()))
}

/// One Max-Weight decision: (rates, transfers, objective). With eps_hat > 0
/// the degraded scheduler is used.
#[pyfunction]
#[pyo3(signature = (net, rows, rates, eps_hat = 0.0, seed = 0))]
fn max_weight(
    net: &PyNetwork,
    rows: Vec<Vec<f64>>,
    rates: &PyRateSet,
    eps_hat: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let q = queues(net, rows)?;
    rates.inner.validate(&net.inner).map_err(value_err)?;
    let dec = if eps_hat == 0.0 {
        max_weight_exact(&net.inner, &q, &rates.inner)
    } else {
        let ap = ApproxParams::degrade(eps_hat).map_err(value_err)?;
        max_weight_approx(&net.inner, &q, &rates.inner, &ap, &mut ChaCha8Rng::seed_from_u64(seed))
    };
    let obj = dec.objective(&net.inner, &q);
    Ok((dec.rates, dec.transfer, obj))
}

/// Runs constant per-slot injections and returns the verdict and series.
#[pyfunction]
#[pyo3(signature = (net, rates, pairs, sizes, horizon, seed = 0, eps_hat = 0.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_fixed<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    rates: &PyRateSet,
    pairs: Vec<(usize, usize)>,
    sizes: Vec<f64>,
    horizon: u64,
    seed: u64,
    eps_hat: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut adv = FixedLoad::new(rates.inner.clone(), pairs, sizes).map_err(value_err)?;
    let approx = if eps_hat == 0.0 {
        ApproxParams::exact()
    } else {
        ApproxParams::degrade(eps_hat).map_err(value_err)?
    };
    let opts = RunOptions::new(horizon).seed(seed).approx(approx);
    let trace = py
        .detach(|| run(&net.inner, &mut adv, &opts))
        .map_err(value_err)?;
    let series = trace.max_queue_series();
    let v = stability_verdict(&series, DEFAULT_SLOPE_THRESHOLD, DEFAULT_PLATEAU_FACTOR);
    let d = PyDict::new(py);
    d.set_item("verdict", format!("{:?}", v.verdict).to_lowercase())?;
    d.set_item("max_queue", v.max_queue_overall)?;
    d.set_item("tail_slope", v.tail_slope)?;
    d.set_item("max_queue_series", series)?;
    d.set_item("injected", trace.injected)?;
    Ok(d)
}

/// Runs the lower-bound adversary until every queue hits its milestone and
/// audits the run against the adversary's witness.
#[pyfunction]
#[pyo3(signature = (n, eps, horizon = 10_000_000))]
fn exponential_run<'py>(py: Python<'py>, n: usize, eps: f64, horizon: u64) -> PyResult<Bound<'py, PyDict>> {
    let spec = mwstab::adversary::exponential_network(n, eps).map_err(value_err)?;
    let ap = AdversaryParams::new(1, eps).map_err(value_err)?;
    let (trace, report) = py
        .detach(|| -> mwstab::Result<_> {
            let mut adv = ExponentialAdversary::new(n, eps)?;
            let trace = run(&spec, &mut adv, &RunOptions::new(horizon).audit(true))?;
            let report = auditor::audit_run(&spec, &ap, adv.witness(), &trace.audit, AuditMode::Exact)?;
            Ok((trace, report))
        })
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("slots", trace.records.len())?;
    d.set_item("halted", trace.halted.as_deref())?;
    d.set_item("max_queue", trace.max_queue_overall())?;
    d.set_item("packets", report.packets.len())?;
    d.set_item("bad_packets", report.bad_packets)?;
    d.set_item("audit_passed", report.passed())?;
    Ok(d)
}

/// Queue level above which a packet's potential change must be negative.
#[pyfunction]
fn q_star(eps: f64, ell: f64, c: f64) -> f64 {
    auditor::q_star(eps, ell, c)
}

/// Exact bound ladder as a JSON string.
#[pyfunction]
#[pyo3(signature = (n, eps, r_min, r_max, q0, c, injections_per_window = 1, max_u_evals = 100_000, max_bits = 65_536))]
#[allow(clippy::too_many_arguments)]
fn bound_constants(
    py: Python<'_>,
    n: usize,
    eps: f64,
    r_min: f64,
    r_max: f64,
    q0: f64,
    c: f64,
    injections_per_window: u64,
    max_u_evals: u64,
    max_bits: u64,
) -> PyResult<String> {
    let p = BoundParams {
        n,
        eps,
        r_min,
        r_max,
        q0,
        c,
        injections_per_window,
        max_u_evals,
        max_bits,
    };
    let b = py.detach(|| compute_bound_constants(&p)).map_err(value_err)?;
    serde_json::to_string(&b).map_err(value_err)
}

#[pymodule]
fn mwstab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyRateSet>()?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(max_weight, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_fixed, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_run, m)?)?;
    m.add_function(wrap_pyfunction!(q_star, m)?)?;
    m.add_function(wrap_pyfunction!(bound_constants, m)?)?;
    Ok(())
}
