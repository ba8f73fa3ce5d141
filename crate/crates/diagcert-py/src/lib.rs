//! Python bindings. Structured results cross the boundary as JSON strings
//! so Python sees the same documents the command line writes.

use std::path::PathBuf;

use diagcert::automaton::{DeltaKDfa, Symbol};
use diagcert::cegis::{synthesize_b, synthesize_v, CegisConfig, CegisOutcome};
use diagcert::certificate::{check_certificate, CertKind, Certificate, CheckConfig, Template};
use diagcert::diagnoser::{run_diagnoser, simulate as sim, GridConfig};
use diagcert::falsifier::Mode;
use diagcert::model::catalog::{running_example, two_room, TwoRoomParams};
use diagcert::model::{load_system, load_system_str, system_to_json, SystemModel};
use diagcert::product_oracle::verify_exact;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_cfg<T: Default + serde::de::DeserializeOwned>(text: Option<&str>) -> PyResult<T> {
    match text {
        Some(t) => serde_json::from_str(t).map_err(err),
        None => Ok(T::default()),
    }
}

/// A finite or continuous system.
#[pyclass(name = "System", module = "diagcert_py", skip_from_py_object)]
#[derive(Clone)]
struct PySystem {
    inner: SystemModel,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySystem {
            inner: load_system_str(text).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySystem {
            inner: load_system(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn running_example() -> Self {
        PySystem {
            inner: SystemModel::Finite(running_example()),
        }
    }

    #[staticmethod]
    fn two_room() -> Self {
        PySystem {
            inner: SystemModel::Continuous(two_room(TwoRoomParams::default())),
        }
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn successor(&self, x: Vec<f64>, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.successor(&x, &u).map_err(err)
    }

    fn to_json(&self) -> String {
        system_to_json(&self.inner)
    }
}

/// The (delta, K) automaton.
#[pyclass(name = "Dfa", module = "diagcert_py")]
struct PyDfa {
    inner: DeltaKDfa,
}

#[pymethods]
impl PyDfa {
    #[new]
    fn new(delta: f64, k: usize) -> PyResult<Self> {
        Ok(PyDfa {
            inner: DeltaKDfa::new(delta, k).map_err(err)?,
        })
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn init(&self) -> usize {
        self.inner.init()
    }

    #[getter]
    fn accept(&self) -> usize {
        self.inner.accept()
    }

    #[getter]
    fn trap(&self) -> usize {
        self.inner.trap()
    }

    fn name(&self, q: usize) -> String {
        self.inner.name(q)
    }

    /// Successor of `q` under a symbol named as on the command line.
    fn tau(&self, q: usize, symbol: &str) -> PyResult<usize> {
        let s = Symbol::ALL
            .iter()
            .copied()
            .find(|s| s.name() == symbol)
            .ok_or_else(|| PyValueError::new_err(format!("unknown symbol {symbol}")))?;
        if q >= self.inner.num_states() {
            return Err(PyValueError::new_err("state out of range"));
        }
        Ok(self.inner.tau(q, s))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.dump()).map_err(err)
    }
}

/// Exact decision for finite systems: `(diagnosable, witness_json_or_None)`.
#[pyfunction]
fn oracle(system: &PySystem, delta: f64, k: usize) -> PyResult<(bool, Option<String>)> {
    let v = verify_exact(&system.inner, delta, k).map_err(err)?;
    let w = match &v.witness {
        Some(w) => Some(serde_json::to_string(w).map_err(err)?),
        None => None,
    };
    Ok((v.diagnosable, w))
}

/// Checks a certificate document: `(verdict, report_json)`.
#[pyfunction]
#[pyo3(signature = (system, certificate, certify = true, config = None))]
fn check(
    system: &PySystem,
    certificate: &str,
    certify: bool,
    config: Option<&str>,
) -> PyResult<(String, String)> {
    let cert = Certificate::from_json(certificate).map_err(err)?;
    let cfg: CheckConfig = parse_cfg(config)?;
    let mode = if certify {
        Mode::Certify
    } else {
        Mode::Falsify
    };
    let r = check_certificate(&system.inner, &cert, mode, &cfg).map_err(err)?;
    Ok((
        r.verdict.as_str().to_string(),
        serde_json::to_string(&r).map_err(err)?,
    ))
}

fn synth(
    system: &PySystem,
    kind: CertKind,
    delta: f64,
    k: usize,
    degree: u32,
    config: Option<&str>,
) -> PyResult<(String, Option<String>)> {
    let cfg: CegisConfig = parse_cfg(config)?;
    let t = Template::uniform(system.inner.state_dim(), k, degree);
    let r = match kind {
        CertKind::B => synthesize_b(&system.inner, delta, k, &t, &cfg),
        CertKind::V => synthesize_v(&system.inner, delta, k, &t, None, &cfg),
    };
    let status = match r.outcome {
        CegisOutcome::Certified { .. } => "Certified",
        CegisOutcome::TemplateInfeasible => "TemplateInfeasible",
        CegisOutcome::Budget => "Budget",
    };
    let cert = match (&r.outcome, &r.certificate) {
        (CegisOutcome::Certified { .. }, Some(c)) => Some(c.to_json()),
        _ => None,
    };
    Ok((status.to_string(), cert))
}

/// Searches for a diagnosability certificate: `(status, certificate_json_or_None)`.
#[pyfunction]
#[pyo3(signature = (system, delta, k, degree = 2, config = None))]
fn verify(
    system: &PySystem,
    delta: f64,
    k: usize,
    degree: u32,
    config: Option<&str>,
) -> PyResult<(String, Option<String>)> {
    synth(system, CertKind::B, delta, k, degree, config)
}

/// Searches for a non-diagnosability certificate.
#[pyfunction]
#[pyo3(signature = (system, delta, k, degree = 2, config = None))]
fn refute(
    system: &PySystem,
    delta: f64,
    k: usize,
    degree: u32,
    config: Option<&str>,
) -> PyResult<(String, Option<String>)> {
    synth(system, CertKind::V, delta, k, degree, config)
}

/// Runs the online diagnoser over outputs `ys`: `(D, sizes, trace_json)`.
#[pyfunction]
#[pyo3(signature = (system, delta, k, ys, config = None))]
fn diagnose(
    system: &PySystem,
    delta: f64,
    k: usize,
    ys: Vec<Vec<f64>>,
    config: Option<&str>,
) -> PyResult<(u8, Vec<usize>, String)> {
    let grid: GridConfig = parse_cfg(config)?;
    let t = run_diagnoser(&system.inner, delta, k, &ys, &grid).map_err(err)?;
    Ok((
        t.d,
        t.sizes.clone(),
        serde_json::to_string(&t).map_err(err)?,
    ))
}

/// Simulates a run: `(states, observations, fault_step)`.
#[pyfunction]
#[pyo3(signature = (system, x0, inputs, delta = 0.0, seed = None))]
fn simulate(
    system: &PySystem,
    x0: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    delta: f64,
    seed: Option<u64>,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Option<usize>)> {
    let r = sim(&system.inner, &x0, &inputs, delta, seed).map_err(err)?;
    Ok((r.states, r.observations, r.fault_step))
}

#[pymodule]
fn diagcert_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_class::<PyDfa>()?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(refute, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
