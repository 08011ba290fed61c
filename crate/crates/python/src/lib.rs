//! Python module `pybellscope`. Results come back as plain dicts and lists
//! built from the library's JSON serialisation.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use bellscope::cglmp;
use bellscope::chsh::{self, LeakConvention, PartyVariant, ScanOptions};
use bellscope::measurements::{audit_fair_sampling, MeasurementSetJson, MeasurementSetting, DEFAULT_AUDIT_TOL};
use bellscope::montecarlo::{self, PlanJson};
use bellscope::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::StructureViolation(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn convention(name: &str) -> PyResult<LeakConvention> {
    match name {
        "leakage" => Ok(LeakConvention::Leakage),
        "target" => Ok(LeakConvention::Target),
        _ => Err(PyValueError::new_err(format!("unknown convention '{name}'"))),
    }
}

fn variant(name: &str) -> PyResult<PartyVariant> {
    match name {
        "symmetric" => Ok(PartyVariant::Symmetric),
        "asymmetric" => Ok(PartyVariant::Asymmetric),
        _ => Err(PyValueError::new_err(format!("unknown variant '{name}'"))),
    }
}

/// s1, s2, S_me and S_bound for one d.
#[pyfunction]
fn witness_bound(py: Python<'_>, d: usize) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &cglmp::witness_bound(d).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (dmin = 2, dmax = 32, unchecked = false))]
fn cglmp_table(py: Python<'_>, dmin: usize, dmax: usize, unchecked: bool) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &cglmp::table(dmin, dmax, unchecked).map_err(py_err)?)
}

#[pyfunction]
fn max_entangled_violation(d: usize) -> PyResult<f64> {
    cglmp::max_entangled_violation(d).map_err(py_err)
}

#[pyfunction]
fn certify(py: Python<'_>, d: usize, s: f64, sigma: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &cglmp::certify(d, s, sigma).map_err(py_err)?)
}

#[derive(Serialize)]
struct ChshSummary {
    s_exact: f64,
    s_postselected: f64,
    correlators_exact: [f64; 4],
    correlators_postselected: [f64; 4],
    fair_sampling: bool,
}

/// Exact and postselected CHSH values for a named scenario:
/// `"standard"`, `"separable4"` or `"anomalous"` (needs `r`).
#[pyfunction]
#[pyo3(signature = (scenario, r = None, convention = "leakage", variant = "symmetric"))]
fn chsh_demo<'py>(
    py: Python<'py>,
    scenario: &str,
    r: Option<f64>,
    convention: &str,
    variant: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let s = match (scenario, r) {
        ("standard", None) => chsh::standard(),
        ("separable4", None) => chsh::separable4(),
        ("anomalous", Some(r)) => chsh::anomalous(r, self::convention(convention)?, self::variant(variant)?),
        ("anomalous", None) => return Err(PyValueError::new_err("scenario 'anomalous' needs r")),
        _ => return Err(PyValueError::new_err(format!("unknown scenario '{scenario}' or stray r"))),
    }
    .map_err(py_err)?;
    let c = chsh::correlators(&s).map_err(py_err)?;
    let audit = |set: &[MeasurementSetting]| audit_fair_sampling(set, DEFAULT_AUDIT_TOL).map(|r| r.passed);
    let fair = audit(&s.first_party()).map_err(py_err)? && audit(&s.second_party()).map_err(py_err)?;
    to_py(
        py,
        &ChshSummary {
            s_exact: chsh::bell_parameter(&c, false),
            s_postselected: chsh::bell_parameter(&c, true),
            correlators_exact: c.exact(),
            correlators_postselected: c.postselected(),
            fair_sampling: fair,
        },
    )
}

/// Postselected S over a grid of r, refined around the maximum.
#[pyfunction]
#[pyo3(signature = (lo = 0.005, hi = 0.705, steps = 141, convention = "leakage", variant = "symmetric"))]
fn scan_r<'py>(
    py: Python<'py>,
    lo: f64,
    hi: f64,
    steps: usize,
    convention: &str,
    variant: &str,
) -> PyResult<Bound<'py, PyAny>> {
    if steps < 2 {
        return Err(PyValueError::new_err("steps must be at least 2"));
    }
    let opts = ScanOptions {
        lo,
        hi,
        step: (hi - lo) / (steps - 1) as f64,
        convention: self::convention(convention)?,
        variant: self::variant(variant)?,
        ..ScanOptions::default()
    };
    to_py(py, &chsh::anomalous_violation_scan(&opts).map_err(py_err)?)
}

/// Fair-sampling audit of a measurement set given as JSON text.
#[pyfunction]
#[pyo3(signature = (text, tol = DEFAULT_AUDIT_TOL))]
fn audit_json<'py>(py: Python<'py>, text: &str, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let set: MeasurementSetJson = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let settings = set.into_settings().map_err(py_err)?;
    to_py(py, &audit_fair_sampling(&settings, tol).map_err(py_err)?)
}

/// Counts for an experiment plan given as JSON text.
#[pyfunction]
fn simulate_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    let plan: PlanJson = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let plan = plan.into_plan().map_err(py_err)?;
    let rec = py.detach(|| montecarlo::simulate(&plan)).map_err(py_err)?;
    to_py(py, &rec)
}

#[pymodule]
fn pybellscope(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(witness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(cglmp_table, m)?)?;
    m.add_function(wrap_pyfunction!(max_entangled_violation, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_demo, m)?)?;
    m.add_function(wrap_pyfunction!(scan_r, m)?)?;
    m.add_function(wrap_pyfunction!(audit_json, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_json, m)?)?;
    m.add("LHV_LIMIT", cglmp::LHV_LIMIT)?;
    Ok(())
}
