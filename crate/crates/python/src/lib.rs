//! Python bindings: norms, measures, subspaces and the main operations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use wrig_core::io::{measure_from_json, measure_to_value, to_canonical_json};
use wrig_core::measures::{kloeckner_two_point, Atom, TwoPointParams};
use wrig_core::{potentials, projections, rigidity, scenarios, transport};
use wrig_core::{AffineSubspace, DiscreteMeasure, Error, NormSpec, Vector};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence(_) | Error::OracleUnavailable(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vector(xs: Vec<f64>) -> Vector {
    Vector::from_vec(xs)
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// A norm on R^n: `Norm("lq", q=3)`, `Norm("euclidean")`, `Norm("linf")`, `Norm("l1")`.
#[pyclass(name = "Norm", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNorm {
    spec: NormSpec,
}

#[pymethods]
impl PyNorm {
    #[new]
    #[pyo3(signature = (kind = "euclidean", q = None))]
    fn new(kind: &str, q: Option<f64>) -> PyResult<Self> {
        let spec = match (kind, q) {
            ("euclidean", None) => NormSpec::Euclidean,
            ("linf", None) => NormSpec::Linf,
            ("l1", None) => NormSpec::L1,
            ("lq", Some(q)) => NormSpec::lq(q).map_err(py_err)?,
            ("lq", None) => return Err(PyValueError::new_err("lq needs q")),
            (other, _) => return Err(PyValueError::new_err(format!("unknown or misused norm kind {other:?}"))),
        };
        Ok(PyNorm { spec })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyNorm {
            spec: NormSpec::from_json(text).map_err(py_err)?,
        })
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        self.spec.eval(&vector(x)).map_err(py_err)
    }

    #[getter]
    fn strictly_convex(&self) -> bool {
        self.spec.strictly_convex()
    }

    fn __repr__(&self) -> String {
        format!("Norm({})", self.spec.name())
    }
}

/// A finitely supported probability measure.
#[pyclass(name = "Measure", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure {
    inner: DiscreteMeasure,
}

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<Self> {
        if points.len() != weights.len() {
            return Err(PyValueError::new_err("points and weights differ in length"));
        }
        let dim = points.first().map_or(0, Vec::len);
        let atoms = points
            .into_iter()
            .zip(weights)
            .map(|(x, w)| Atom::new(vector(x), w))
            .collect();
        Ok(PyMeasure {
            inner: DiscreteMeasure::new(dim, atoms).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn dirac(point: Vec<f64>) -> Self {
        PyMeasure {
            inner: wrig_core::dirac(vector(point)),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMeasure {
            inner: measure_from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> String {
        to_canonical_json(&measure_to_value(&self.inner))
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.inner.points().map(to_vec).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn is_dirac(&self) -> bool {
        self.inner.is_dirac()
    }

    #[pyo3(signature = (other, tol = 1e-9))]
    fn approx_eq(&self, other: &PyMeasure, tol: f64) -> bool {
        self.inner.approx_eq(&other.inner, tol)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Measure(dim={}, atoms={})", self.inner.dim(), self.inner.len())
    }
}

/// `base + span(directions)`.
#[pyclass(name = "Subspace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySubspace {
    inner: AffineSubspace,
}

#[pymethods]
impl PySubspace {
    #[new]
    fn new(base: Vec<f64>, directions: Vec<Vec<f64>>) -> PyResult<Self> {
        let dirs = directions.into_iter().map(vector).collect();
        Ok(PySubspace {
            inner: AffineSubspace::new(vector(base), dirs).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn axis(dim: usize, i: usize) -> PyResult<Self> {
        Ok(PySubspace {
            inner: AffineSubspace::axis(dim, i).map_err(py_err)?,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    fn __repr__(&self) -> String {
        format!("Subspace(dim={}, rank={})", self.inner.dim(), self.inner.rank())
    }
}

fn spec(norm: Option<&PyNorm>) -> NormSpec {
    norm.map_or(NormSpec::Euclidean, |n| n.spec.clone())
}

/// W_p distance; the norm defaults to Euclidean.
#[pyfunction]
#[pyo3(signature = (mu, nu, norm = None, p = 2.0))]
fn wasserstein(mu: &PyMeasure, nu: &PyMeasure, norm: Option<&PyNorm>, p: f64) -> PyResult<f64> {
    transport::distance(&mu.inner, &nu.inner, &spec(norm), p).map_err(py_err)
}

/// `(distance, plan)` with the plan as a list of rows.
#[pyfunction]
#[pyo3(signature = (mu, nu, norm = None, p = 2.0))]
fn plan(mu: &PyMeasure, nu: &PyMeasure, norm: Option<&PyNorm>, p: f64) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let r = transport::solve(&mu.inner, &nu.inner, &spec(norm), p).map_err(py_err)?;
    let rows = r
        .plan
        .mass
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    Ok((r.distance, rows))
}

/// Projection of a measure onto a subspace.
#[pyfunction]
#[pyo3(signature = (mu, subspace, norm = None, p = 2.0))]
fn project(mu: &PyMeasure, subspace: &PySubspace, norm: Option<&PyNorm>, p: f64) -> PyResult<PyMeasure> {
    let inner = projections::project_measure(&mu.inner, &subspace.inner, &spec(norm), p).map_err(py_err)?;
    Ok(PyMeasure { inner })
}

/// Nearest point of the subspace.
#[pyfunction]
#[pyo3(signature = (x, subspace, norm = None, p = 2.0))]
fn project_point(x: Vec<f64>, subspace: &PySubspace, norm: Option<&PyNorm>, p: f64) -> PyResult<Vec<f64>> {
    let px = projections::project_point(&vector(x), &subspace.inner, &spec(norm), p).map_err(py_err)?;
    Ok(to_vec(&px))
}

/// `d(mu, delta_x)^p`.
#[pyfunction]
#[pyo3(signature = (mu, x, norm = None, p = 2.0))]
fn potential(mu: &PyMeasure, x: Vec<f64>, norm: Option<&PyNorm>, p: f64) -> PyResult<f64> {
    potentials::potential_eval(&mu.inner, &spec(norm), p, &vector(x)).map_err(py_err)
}

/// Mass of `mu` at `x` from second differences; returns a dict with
/// `estimate`, `converged` and `h_sequence`.
#[pyfunction]
#[pyo3(signature = (mu, x, direction, norm = None, p = 1.5, h0 = 0.25, shrink = 0.5, steps = 20))]
#[allow(clippy::too_many_arguments)]
fn atom_estimate<'py>(
    py: Python<'py>,
    mu: &PyMeasure,
    x: Vec<f64>,
    direction: Vec<f64>,
    norm: Option<&PyNorm>,
    p: f64,
    h0: f64,
    shrink: f64,
    steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let est = potentials::atom_estimate(
        &mu.inner,
        &spec(norm),
        p,
        &vector(x),
        &vector(direction),
        h0,
        shrink,
        steps,
    )
    .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("estimate", est.estimate)?;
    out.set_item("converged", est.converged)?;
    out.set_item("h_sequence", est.h_sequence)?;
    Ok(out)
}

/// `(v1, v2)` with a non-trivial pairing kernel, or `None`.
#[pyfunction]
#[pyo3(signature = (norm, p = 2.0, dim = 2, grid = 16, seed = 0))]
fn direction_search(
    norm: &PyNorm,
    p: f64,
    dim: usize,
    grid: usize,
    seed: u64,
) -> PyResult<Option<(Vec<f64>, Vec<f64>)>> {
    let found = potentials::direction_search(&norm.spec, p, dim, grid, seed).map_err(py_err)?;
    Ok(found.map(|d| (to_vec(&d.v1), to_vec(&d.v2))))
}

#[pyfunction]
fn convexity_gap(q: f64, a: f64) -> PyResult<f64> {
    rigidity::convexity_gap(q, a).map_err(py_err)
}

/// Two-point measure with parameters `(x, sigma, p)` on `origin + R axis`.
#[pyfunction]
#[pyo3(signature = (x, sigma, p, axis = None, origin = None))]
fn kloeckner_two_point_measure(
    x: f64,
    sigma: f64,
    p: f64,
    axis: Option<Vec<f64>>,
    origin: Option<Vec<f64>>,
) -> PyResult<PyMeasure> {
    let axis = vector(axis.unwrap_or_else(|| vec![1.0, 0.0]));
    let origin = origin.map(vector).unwrap_or_else(|| Vector::zeros(axis.len()));
    let inner = kloeckner_two_point(&TwoPointParams::new(axis, origin, x, sigma, p)).map_err(py_err)?;
    Ok(PyMeasure { inner })
}

/// Scenario result as a dict.
#[pyfunction]
#[pyo3(signature = (id, seed = 0))]
fn run_scenario<'py>(py: Python<'py>, id: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let result = scenarios::run_scenario(id, seed).map_err(py_err)?;
    let value = serde_json::to_value(&result).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value_to_py(py, &value)
}

#[pyfunction]
fn scenario_ids() -> Vec<&'static str> {
    scenarios::scenario_ids()
}

#[pymodule]
fn wrig(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNorm>()?;
    m.add_class::<PyMeasure>()?;
    m.add_class::<PySubspace>()?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(project_point, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(atom_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(direction_search, m)?)?;
    m.add_function(wrap_pyfunction!(convexity_gap, m)?)?;
    m.add("kloeckner_two_point", wrap_pyfunction!(kloeckner_two_point_measure, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_ids, m)?)?;
    Ok(())
}
