//! Python bindings. Every document crosses the boundary as a JSON string in
//! the same formats the command-line tool reads and writes.

use std::collections::BTreeMap;
use std::str::FromStr;

use aspectra_core::aspects::{compile_all, parse_concerns, CompiledAspect};
use aspectra_core::oracle::classify_pair as oracle_classify;
use aspectra_core::report::{self, analyze as run_analysis, JoinpointTree};
use aspectra_core::{StateMachine, DEFAULT_MAX_OVERLAPS, ENGINE_VERSION};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(aspectra, AspectraError, PyException, "Invalid model, aspect or report input.");

fn fail(e: impl std::fmt::Display) -> PyErr {
    AspectraError::new_err(e.to_string())
}

fn model(json: &str) -> PyResult<StateMachine> {
    serde_json::from_str(json).map_err(fail)
}

fn aspects(json: &str) -> PyResult<Vec<CompiledAspect>> {
    if json.trim().is_empty() {
        return Ok(Vec::new());
    }
    compile_all(&parse_concerns(json).map_err(fail)?).map_err(fail)
}

/// Flattened graph of a statechart model, as JSON or DOT.
#[pyfunction]
#[pyo3(signature = (model_json, format = "json"))]
fn flatten(model_json: &str, format: &str) -> PyResult<String> {
    let sm = model(model_json)?;
    let graph = aspectra_core::flatten(&sm).map_err(fail)?;
    match format {
        "json" => serde_json::to_string_pretty(&graph).map_err(fail),
        "dot" => Ok(graph.to_dot(&sm.name)),
        other => Err(PyValueError::new_err(format!("unknown format `{other}`"))),
    }
}

/// Compiled rules as a JSON list in the rule exchange format.
#[pyfunction]
fn compile(aspects_json: &str) -> PyResult<String> {
    let compiled = aspects(aspects_json)?;
    let rules: Vec<_> = compiled.iter().flat_map(|c| &c.rules).collect();
    serde_json::to_string_pretty(&rules).map_err(fail)
}

/// Number of rules each aspect compiles to.
#[pyfunction]
fn rule_counts(aspects_json: &str) -> PyResult<BTreeMap<String, usize>> {
    Ok(aspects(aspects_json)?.into_iter().map(|c| (c.aspect, c.rules.len())).collect())
}

/// Pairwise interaction report rendered as `json`, `csv`, `table` or `dot`.
#[pyfunction]
#[pyo3(signature = (aspects_json, format = "json", max_overlaps = DEFAULT_MAX_OVERLAPS))]
fn analyze(py: Python<'_>, aspects_json: &str, format: &str, max_overlaps: usize) -> PyResult<String> {
    if max_overlaps == 0 {
        return Err(PyValueError::new_err("max_overlaps must be at least 1"));
    }
    let format = report::Format::from_str(format).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let compiled = aspects(aspects_json)?;
    let bytes = py.detach(|| {
        run_analysis(&compiled, max_overlaps)
            .map(|(matrix, _)| report::render(&matrix, &JoinpointTree::from_matrix(&matrix), format))
    });
    String::from_utf8(bytes.map_err(fail)?).map_err(fail)
}

/// Oracle classification of `first` woven against `second` on the model,
/// for example `"a2_depends_on_a1"`.
#[pyfunction]
fn classify_pair(model_json: &str, aspects_json: &str, first: &str, second: &str) -> PyResult<String> {
    if first == second {
        return Err(PyValueError::new_err("an aspect is not paired with itself"));
    }
    let sm = model(model_json)?;
    let compiled = aspects(aspects_json)?;
    let find = |name: &str| {
        compiled
            .iter()
            .find(|c| c.aspect == name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown aspect `{name}`")))
    };
    let verdict = oracle_classify(&sm, find(first)?, find(second)?).map_err(fail)?;
    Ok(verdict.classification.as_str().to_string())
}

#[pymodule]
fn aspectra(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("ENGINE_VERSION", ENGINE_VERSION)?;
    m.add("AspectraError", m.py().get_type::<AspectraError>())?;
    m.add_function(wrap_pyfunction!(flatten, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(rule_counts, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(classify_pair, m)?)?;
    Ok(())
}
