use std::collections::BTreeMap;

use elliptica_core::elliptic::{self, EllipticCurve, Tau};
use elliptica_core::identities::{self, SamplePlan};
use elliptica_core::matrixalg::CMatrix;
use elliptica_core::painleve::{self, PVIConstants, PVIState, ResidualMode, StepperConfig};
use elliptica_core::report::run_suite_report;
use elliptica_core::rmatrix::BelavinR;
use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

type C = Complex64;

fn err(e: elliptica_core::Error) -> PyErr {
    match e {
        elliptica_core::Error::UnknownCheck(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn tau(t: C) -> PyResult<Tau> {
    Tau::new(t).map_err(err)
}

fn rows(m: &CMatrix) -> Vec<Vec<C>> {
    let d = m.dim();
    m.as_slice().chunks(d).map(|r| r.to_vec()).collect()
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<PyObject> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_py(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_py(py),
        },
        Value::String(s) => s.into_py(py),
        Value::Array(a) => {
            let items = a
                .iter()
                .map(|x| json_to_py(py, x))
                .collect::<PyResult<Vec<_>>>()?;
            PyList::new_bound(py, items).into_py(py)
        }
        Value::Object(o) => {
            let d = PyDict::new_bound(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_py(py)
        }
    })
}

#[pyfunction]
fn theta(z: C, tau_: C) -> PyResult<C> {
    elliptic::theta(z, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn e1(z: C, tau_: C) -> PyResult<C> {
    elliptic::e1(z, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn e2(z: C, tau_: C) -> PyResult<C> {
    elliptic::e2(z, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn wp(z: C, tau_: C) -> PyResult<C> {
    elliptic::wp(z, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn wp_prime(z: C, tau_: C) -> PyResult<C> {
    elliptic::wp_prime(z, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn kronecker_phi(z: C, u: C, tau_: C) -> PyResult<C> {
    elliptic::kronecker_phi(z, u, tau(tau_)?).map_err(err)
}

#[pyfunction]
fn kronecker_phi_q_series(z: C, u: C, tau_: C) -> PyResult<C> {
    elliptic::kronecker_phi_q_series(z, u, tau(tau_)?).map_err(err)
}

/// `Z_N × Z_N` elliptic R-matrix family at fixed modulus. Matrices are
/// returned as lists of rows.
#[pyclass(name = "RMatrix", module = "elliptica")]
struct PyRMatrix {
    inner: BelavinR,
}

#[pymethods]
impl PyRMatrix {
    #[new]
    fn new(n: usize, tau_: C) -> PyResult<Self> {
        Ok(Self {
            inner: BelavinR::new(n, tau(tau_)?).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn tau(&self) -> C {
        self.inner.tau().value()
    }

    fn r12(&self, hbar: C, z: C) -> PyResult<Vec<Vec<C>>> {
        Ok(rows(&self.inner.r12(hbar, z).map_err(err)?))
    }

    fn r21(&self, hbar: C, z: C) -> PyResult<Vec<Vec<C>>> {
        Ok(rows(&self.inner.r21(hbar, z).map_err(err)?))
    }

    fn f_matrix(&self, hbar: C, z: C) -> PyResult<Vec<Vec<C>>> {
        let lay = self.inner.pair_layout();
        Ok(rows(&self.inner.f_matrix(hbar, z, 1, 2, lay).map_err(err)?))
    }

    fn dh_r(&self, hbar: C, z: C) -> PyResult<Vec<Vec<C>>> {
        let lay = self.inner.pair_layout();
        Ok(rows(&self.inner.dh_r(hbar, z, 1, 2, lay).map_err(err)?))
    }

    fn classical_r(&self, z: C) -> PyResult<Vec<Vec<C>>> {
        let lay = self.inner.pair_layout();
        Ok(rows(&self.inner.classical_r(z, 1, 2, lay).map_err(err)?))
    }

    fn classical_m(&self, z: C) -> PyResult<Vec<Vec<C>>> {
        let lay = self.inner.pair_layout();
        Ok(rows(&self.inner.classical_m(z, 1, 2, lay).map_err(err)?))
    }

    fn r_zero(&self, hbar: C) -> PyResult<Vec<Vec<C>>> {
        let lay = self.inner.pair_layout();
        Ok(rows(&self.inner.r_zero(hbar, 1, 2, lay).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("RMatrix(n={}, tau={})", self.inner.n(), self.inner.tau().value())
    }
}

fn plan(
    seed: u64,
    count: usize,
    n_list: Vec<usize>,
    tau_list: Vec<C>,
    pole_guard: f64,
) -> PyResult<SamplePlan> {
    Ok(SamplePlan {
        seed,
        count,
        n_list,
        tau_list: tau_list.into_iter().map(tau).collect::<PyResult<_>>()?,
        pole_guard,
    })
}

#[pyfunction]
fn list_checks() -> Vec<String> {
    identities::registry().into_iter().map(|c| c.id).collect()
}

/// Runs identity checks and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (ids=None, seed=42, count=50, n_list=vec![1, 2, 3], tau_list=vec![C::new(0.0, 0.8)], pole_guard=0.05, tolerances=None))]
#[allow(clippy::too_many_arguments)]
fn run_suite(
    py: Python<'_>,
    ids: Option<Vec<String>>,
    seed: u64,
    count: usize,
    n_list: Vec<usize>,
    tau_list: Vec<C>,
    pole_guard: f64,
    tolerances: Option<BTreeMap<String, f64>>,
) -> PyResult<PyObject> {
    let plan = plan(seed, count, n_list, tau_list, pole_guard)?;
    let overrides = tolerances.unwrap_or_default();
    let report = py
        .allow_threads(|| run_suite_report(ids.as_deref(), &plan, &overrides))
        .map_err(err)?;
    let v = serde_json::to_value(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn constants(nu: Vec<C>) -> PyResult<PVIConstants> {
    let nu: [C; 4] = nu
        .try_into()
        .map_err(|_| PyValueError::new_err("nu must have four entries"))?;
    Ok(PVIConstants::new(nu))
}

#[pyfunction]
#[pyo3(signature = (u, v, tau_, hbar, nu=vec![C::new(0.1, 0.0), C::new(0.2, 0.0), C::new(0.3, 0.0), C::new(0.4, 0.0)], n=1))]
fn monodromy_residual(u: C, v: C, tau_: C, hbar: C, nu: Vec<C>, n: usize) -> PyResult<f64> {
    let state = PVIState {
        u,
        v,
        tau: tau(tau_)?,
    };
    painleve::monodromy_residual(&state, &constants(nu)?, hbar, n, ResidualMode::Analytic).map_err(err)
}

#[pyfunction]
fn check_zero_curvature(py: Python<'_>, tau_: C, n: usize, hbar: C, u: C, u_alt: C) -> PyResult<PyObject> {
    let r = painleve::check_zero_curvature_identities(tau(tau_)?, n, hbar, u, u_alt).map_err(err)?;
    let v = serde_json::to_value(r).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Integrates the Painlevé VI flow; returns `{"tau", "u", "v", "halt"}`.
#[pyfunction]
#[pyo3(signature = (u0, v0, tau0, tau1, nu=vec![C::new(0.1, 0.0), C::new(0.2, 0.0), C::new(0.3, 0.0), C::new(0.4, 0.0)], n=1, rtol=1e-11))]
fn integrate(
    py: Python<'_>,
    u0: C,
    v0: C,
    tau0: C,
    tau1: C,
    nu: Vec<C>,
    n: usize,
    rtol: f64,
) -> PyResult<PyObject> {
    let init = PVIState {
        u: u0,
        v: v0,
        tau: tau(tau0)?,
    };
    let config = StepperConfig {
        rtol,
        ..StepperConfig::default()
    };
    let k = constants(nu)?;
    let tr = py
        .allow_threads(|| painleve::integrate(&init, &k, n, tau1, &config))
        .map_err(err)?;
    let d = PyDict::new_bound(py);
    d.set_item("tau", tr.points.iter().map(|p| p.tau).collect::<Vec<_>>())?;
    d.set_item("u", tr.points.iter().map(|p| p.u).collect::<Vec<_>>())?;
    d.set_item("v", tr.points.iter().map(|p| p.v).collect::<Vec<_>>())?;
    d.set_item("halt", tr.halt.map(|h| h.to_string()))?;
    Ok(d.into_py(py))
}

#[pyfunction]
fn curve_values(z: C, u: C, tau_: C) -> PyResult<(C, C, C, C)> {
    let cv = EllipticCurve::new(tau(tau_)?).map_err(err)?;
    let f =
        || -> elliptica_core::Result<(C, C, C, C)> { Ok((cv.phi(z, u)?, cv.e1(z)?, cv.e2(z)?, cv.wp(z)?)) };
    f().map_err(err)
}

#[pymodule]
fn elliptica(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRMatrix>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(e1, m)?)?;
    m.add_function(wrap_pyfunction!(e2, m)?)?;
    m.add_function(wrap_pyfunction!(wp, m)?)?;
    m.add_function(wrap_pyfunction!(wp_prime, m)?)?;
    m.add_function(wrap_pyfunction!(kronecker_phi, m)?)?;
    m.add_function(wrap_pyfunction!(kronecker_phi_q_series, m)?)?;
    m.add_function(wrap_pyfunction!(curve_values, m)?)?;
    m.add_function(wrap_pyfunction!(list_checks, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(monodromy_residual, m)?)?;
    m.add_function(wrap_pyfunction!(check_zero_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    Ok(())
}
