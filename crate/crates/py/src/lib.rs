//! Python bindings. Results are returned as plain Python objects with exact
//! rationals encoded as integers or `"n/d"` strings.

use ipmech::benchmarks::{self, BenchmarkError};
use ipmech::env::{self, environment_from_json};
use ipmech::refine::{self, RefineError};
use ipmech::rsw::{self, RswError};
use ipmech::{catalog, Rational};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(ipmech, InputError, PyValueError, "Malformed or inconsistent input.");
create_exception!(ipmech, PreconditionError, PyValueError, "A documented precondition does not hold.");
create_exception!(ipmech, VerificationError, pyo3::exceptions::PyRuntimeError, "An internal post-verification failed.");

fn input(e: impl ToString) -> PyErr {
    InputError::new_err(e.to_string())
}

fn rsw_err(e: RswError) -> PyErr {
    match e {
        RswError::BadWeights => input(e),
        other => VerificationError::new_err(other.to_string()),
    }
}

fn bench_err(e: BenchmarkError) -> PyErr {
    match e {
        BenchmarkError::MonotonicityHypothesisFails { .. } => PreconditionError::new_err(e.to_string()),
        BenchmarkError::Allocation(_) => input(e),
        BenchmarkError::Rsw(r) => rsw_err(r),
        other => VerificationError::new_err(other.to_string()),
    }
}

fn refine_err(e: RefineError) -> PyErr {
    match e {
        RefineError::PreconditionFailed(_)
        | RefineError::InfeasibleInput(_)
        | RefineError::UnsupportedDimension(_) => PreconditionError::new_err(e.to_string()),
        RefineError::Allocation(_) => input(e),
        RefineError::Rsw(r) => rsw_err(r),
        other => VerificationError::new_err(other.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| VerificationError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Finite-type trading environment.
#[pyclass(name = "Environment", frozen)]
pub struct PyEnvironment {
    inner: env::Environment,
}

#[pymethods]
impl PyEnvironment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        environment_from_json(text)
            .map(|inner| PyEnvironment { inner })
            .map_err(input)
    }

    /// Builds one of the bundled environments by name.
    #[staticmethod]
    fn catalog(name: &str) -> PyResult<Self> {
        catalog::all()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, inner)| PyEnvironment { inner })
            .ok_or_else(|| input(format!("unknown environment {name:?}")))
    }

    #[staticmethod]
    fn catalog_names() -> Vec<&'static str> {
        catalog::all().into_iter().map(|(n, _)| n).collect()
    }

    fn to_json(&self) -> String {
        self.inner.canonical_json()
    }

    #[getter]
    fn x_size(&self) -> usize {
        self.inner.x_size()
    }

    #[getter]
    fn y_size(&self) -> usize {
        self.inner.y_size()
    }

    fn derived(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &env::derived_quantities(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Environment(x_size={}, y_size={})", self.inner.x_size(), self.inner.y_size())
    }
}

/// Trade probabilities `q` and payments `t` indexed by seller then buyer type.
#[pyclass(name = "Allocation", frozen)]
pub struct PyAllocation {
    inner: env::Allocation,
}

#[pymethods]
impl PyAllocation {
    #[staticmethod]
    fn from_json(text: &str, x_size: usize, y_size: usize) -> PyResult<Self> {
        env::Allocation::from_json(text, x_size, y_size)
            .map(|inner| PyAllocation { inner })
            .map_err(input)
    }

    #[staticmethod]
    fn no_trade(x_size: usize, y_size: usize) -> Self {
        PyAllocation {
            inner: env::Allocation::no_trade(x_size, y_size),
        }
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("serializable allocation")
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }
}

fn parse_weights(weights: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<Rational>> {
    weights
        .iter()
        .map(|w| w.str()?.to_string().parse::<Rational>().map_err(input))
        .collect()
}

#[pyfunction]
#[pyo3(signature = (environment, weights=None))]
fn solve_rsw(
    py: Python<'_>,
    environment: &PyEnvironment,
    weights: Option<Vec<Bound<'_, PyAny>>>,
) -> PyResult<Py<PyAny>> {
    let sol = match weights {
        Some(w) => rsw::solve_rsw_weighted(&environment.inner, &parse_weights(w)?),
        None => rsw::solve_rsw(&environment.inner),
    }
    .map_err(rsw_err)?;
    to_py(py, &sol)
}

#[pyfunction]
fn solve_full_information(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &benchmarks::solve_full_information(&environment.inner))
}

#[pyfunction]
#[pyo3(signature = (environment, seller_iir=false))]
fn solve_ex_ante_optimal(
    py: Python<'_>,
    environment: &PyEnvironment,
    seller_iir: bool,
) -> PyResult<Py<PyAny>> {
    let sol = benchmarks::solve_ex_ante_optimal_with(&environment.inner, seller_iir).map_err(bench_err)?;
    to_py(py, &sol)
}

#[pyfunction]
fn efficient_rule(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &env::efficient_rule(&environment.inner))
}

#[pyfunction]
fn seller_payoffs(
    py: Python<'_>,
    environment: &PyEnvironment,
    allocation: &PyAllocation,
) -> PyResult<Py<PyAny>> {
    allocation
        .inner
        .validate(environment.inner.x_size(), environment.inner.y_size())
        .map_err(input)?;
    to_py(py, &env::seller_payoff_vector(&environment.inner, &allocation.inner))
}

/// Constraint slacks and flags under the prior.
#[pyfunction]
fn check_constraints(
    py: Python<'_>,
    environment: &PyEnvironment,
    allocation: &PyAllocation,
) -> PyResult<Py<PyAny>> {
    let e = &environment.inner;
    allocation.inner.validate(e.x_size(), e.y_size()).map_err(input)?;
    to_py(py, &env::check_constraints(e, &allocation.inner, &e.prior()))
}

#[pyfunction]
fn check_core(
    py: Python<'_>,
    environment: &PyEnvironment,
    allocation: &PyAllocation,
) -> PyResult<Py<PyAny>> {
    to_py(py, &refine::check_core(&environment.inner, &allocation.inner).map_err(refine_err)?)
}

#[pyfunction]
fn check_strong_solution(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &refine::check_strong_solution(&environment.inner).map_err(refine_err)?)
}

#[pyfunction]
fn check_fgp_exists(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &refine::check_fgp_exists(&environment.inner).map_err(refine_err)?)
}

#[pyfunction]
fn check_snp_exists(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &refine::check_snp_exists(&environment.inner).map_err(refine_err)?)
}

#[pyfunction]
fn seller_payoff_set(py: Python<'_>, environment: &PyEnvironment) -> PyResult<Py<PyAny>> {
    to_py(py, &refine::seller_payoff_set(&environment.inner).map_err(refine_err)?)
}

/// Payoff-equivalent allocation with buyer ex post incentive compatibility.
#[pyfunction]
fn epic_equivalent(
    py: Python<'_>,
    environment: &PyEnvironment,
    allocation: &PyAllocation,
) -> PyResult<Py<PyAny>> {
    let (g, trace) = refine::epic_equivalent(&environment.inner, &allocation.inner).map_err(refine_err)?;
    to_py(py, &serde_json::json!({ "allocation": g, "trace": trace }))
}

#[pyfunction]
#[pyo3(signature = (environment, seller_iir=false))]
fn payoff_comparison_report(
    py: Python<'_>,
    environment: &PyEnvironment,
    seller_iir: bool,
) -> PyResult<Py<PyAny>> {
    let report = benchmarks::payoff_comparison_report_with(&environment.inner, seller_iir).map_err(bench_err)?;
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "ipmech")]
fn ipmech_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("PreconditionError", py.get_type::<PreconditionError>())?;
    m.add("VerificationError", py.get_type::<VerificationError>())?;
    m.add_class::<PyEnvironment>()?;
    m.add_class::<PyAllocation>()?;
    m.add_function(wrap_pyfunction!(solve_rsw, m)?)?;
    m.add_function(wrap_pyfunction!(solve_full_information, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ex_ante_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(efficient_rule, m)?)?;
    m.add_function(wrap_pyfunction!(seller_payoffs, m)?)?;
    m.add_function(wrap_pyfunction!(check_constraints, m)?)?;
    m.add_function(wrap_pyfunction!(check_core, m)?)?;
    m.add_function(wrap_pyfunction!(check_strong_solution, m)?)?;
    m.add_function(wrap_pyfunction!(check_fgp_exists, m)?)?;
    m.add_function(wrap_pyfunction!(check_snp_exists, m)?)?;
    m.add_function(wrap_pyfunction!(seller_payoff_set, m)?)?;
    m.add_function(wrap_pyfunction!(epic_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(payoff_comparison_report, m)?)?;
    Ok(())
}
