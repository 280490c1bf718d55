//! Python bindings: feasibility queries, protocol runs, and verification,
//! exchanging transcripts and deals as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report_to_dict<'py>(
    py: Python<'py>,
    r: &rcards::FeasibilityReport,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("a", r.a)?;
    d.set_item("b", r.b)?;
    d.set_item("c", r.c)?;
    d.set_item("d", r.d)?;
    d.set_item("k", r.k)?;
    d.set_item("cond1", r.cond1)?;
    d.set_item("cond2", r.cond2)?;
    d.set_item("cond3", r.cond3)?;
    d.set_item("cond4", r.cond4)?;
    d.set_item("cond5", r.cond5)?;
    d.set_item("via", r.via)?;
    d.set_item("simplified_bound", r.simplified_bound)?;
    d.set_item("feasible", r.feasible)?;
    Ok(d)
}

/// sigma_d(n) = n^(d-1) + ... + n + 1: lines through a point of F_n^d.
#[pyfunction]
fn sigma(d: u32, n: u64) -> u64 {
    rcards::sigma(d, n)
}

/// Evaluate the five executability conditions for (a, c, d, k).
#[pyfunction]
fn feasible(py: Python<'_>, a: u64, c: u64, d: u32, k: u64) -> PyResult<Py<PyDict>> {
    Ok(report_to_dict(py, &rcards::feasible(a, c, d, k))?.into())
}

/// Smallest k making (a, c, d, k) feasible, or None.
#[pyfunction]
fn search_k(a: u64, c: u64, d: u32) -> Option<u64> {
    rcards::search_k(a, c, d)
}

/// Regime parameters ("d3" or "d4"): returns (k, c, b, report).
#[pyfunction]
fn suggest_params(py: Python<'_>, a: u64, regime: &str) -> PyResult<(u64, u64, u64, Py<PyDict>)> {
    let regime: rcards::Regime = regime.parse().map_err(|e: rcards::ParamsError| {
        PyValueError::new_err(e.to_string())
    })?;
    let (k, c, b, report) = rcards::suggest_params(a, regime)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((k, c, b, report_to_dict(py, &report)?.into()))
}

/// Deal at random and run the protocol; returns (transcript_json, deal_json).
#[pyfunction]
#[pyo3(signature = (a, c, d, k, seed=0))]
fn run_protocol(a: u64, c: u64, d: u32, k: u32, seed: u64) -> PyResult<(String, String)> {
    let b = (a as i128).pow(d) - a as i128 - c as i128;
    if b < 0 {
        return Err(PyValueError::new_err("a^d - a - c is negative"));
    }
    let params = rcards::ProtocolParams::new(a, b as u64, c, d, k, None)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let space = params.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deal = rcards::deal_random(a, b as u64, c, &mut rng);
    let transcript =
        rcards::run_protocol(&deal, &params, &space, seed, rcards::Leftover::Deterministic)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((
        transcript.to_json(&space).to_string(),
        deal.to_json().to_string(),
    ))
}

/// Verify an execution; returns a dict with executed / informative /
/// safe / leaked_to_alice. `sample` limits safety to the first n cards.
#[pyfunction]
#[pyo3(signature = (transcript_json, deal_json, sample=None))]
fn verify(
    py: Python<'_>,
    transcript_json: &str,
    deal_json: &str,
    sample: Option<usize>,
) -> PyResult<Py<PyDict>> {
    let tval: serde_json::Value = serde_json::from_str(transcript_json)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let dval: serde_json::Value =
        serde_json::from_str(deal_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (transcript, space) = rcards::Transcript::from_json(&tval)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let deal =
        rcards::Deal::from_json(&dval).map_err(|e| PyValueError::new_err(e.to_string()))?;

    let executed = rcards::verify_execution(&space, &transcript, &deal)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let informative = rcards::check_informative(&space, &transcript, &deal);
    let cards: Option<Vec<u32>> = sample.map(|n| {
        (1..=space.num_points() as u32)
            .filter(|c| !deal.cath.contains(c))
            .take(n)
            .collect()
    });
    let safety = rcards::check_weak_safety(&space, &transcript, &deal, cards.as_deref());

    let out = PyDict::new(py);
    out.set_item("executed", executed)?;
    out.set_item("informative", informative)?;
    out.set_item("safe", safety.pass)?;
    out.set_item("cards_checked", safety.cards.len())?;
    out.set_item(
        "leaked_to_alice",
        PyList::new(py, safety.leaked_to_alice())?,
    )?;
    Ok(out.into())
}

#[pymodule]
fn rcards_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(feasible, m)?)?;
    m.add_function(wrap_pyfunction!(search_k, m)?)?;
    m.add_function(wrap_pyfunction!(suggest_params, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
