//! Python module `evobase`: verifiers, estimators and runs.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use evobase_core::config::{execute, RunConfig};
use evobase_core::model::Direction;
use evobase_core::report::{ReportTable, ScoreEntry};
use evobase_core::stats::{self, BudgetedTrial, BudgetedTrialSet, DominanceMode, Pairing, ScoreMatrix};
use evobase_core::verifiers::{CirclePacking, VerifierRegistry};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn direction(s: &str) -> PyResult<Direction> {
    s.parse().map_err(err)
}

/// Score a JSON payload with a built-in verifier.
#[pyfunction]
fn score(verifier: &str, payload: &str) -> PyResult<f64> {
    let value: serde_json::Value = serde_json::from_str(payload).map_err(err)?;
    VerifierRegistry::builtin().score(verifier, &value).map_err(err)
}

/// Circles as (x, y, r) triples; true iff disjoint and inside the unit square.
#[pyfunction]
fn verify_circles(circles: Vec<(f64, f64, f64)>) -> bool {
    evobase_core::verifiers::verify_circles(&CirclePacking::new(circles.into_iter().map(|(x, y, r)| [x, y, r])))
}

#[pyfunction]
fn pass_at_k(n: u64, c: u64, k: u64) -> PyResult<f64> {
    stats::pass_at_k(n, c, k).map_err(err)
}

/// Trials are (costs, best_scores) pairs, one entry per generation.
#[pyfunction]
#[pyo3(signature = (trials, target, budget, direction="maximize"))]
fn scs_match_probability(trials: Vec<(Vec<f64>, Vec<f64>)>, target: f64, budget: f64, direction: &str) -> PyResult<f64> {
    let set = BudgetedTrialSet {
        trials: trials
            .into_iter()
            .map(|(costs, best_scores)| BudgetedTrial { costs, best_scores })
            .collect(),
        target,
        direction: self::direction(direction)?,
    };
    stats::scs_match_probability(&set, &budget).map_err(err)
}

/// Returns (probability, standard error); the error is 0 unless `mc_samples` is set.
#[pyfunction]
#[pyo3(signature = (samples, focus, direction="maximize", mc_samples=None, seed=0))]
fn probability_of_dominance(
    samples: Vec<Vec<f64>>,
    focus: usize,
    direction: &str,
    mc_samples: Option<usize>,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let methods = (0..samples.len()).map(|i| i.to_string()).collect();
    let m = ScoreMatrix::new(methods, samples, self::direction(direction)?).map_err(err)?;
    let mode = match mc_samples {
        Some(samples) => DominanceMode::MonteCarlo { samples, seed },
        None => DominanceMode::Exact,
    };
    let e = stats::probability_of_dominance(&m, focus, mode).map_err(err)?;
    Ok((e.value, e.std_error))
}

#[pyfunction]
#[pyo3(signature = (a, b, direction="maximize", index_paired=false))]
fn probability_of_improvement(a: Vec<f64>, b: Vec<f64>, direction: &str, index_paired: bool) -> PyResult<f64> {
    let pairing = if index_paired { Pairing::IndexPaired } else { Pairing::AllPairs };
    stats::probability_of_improvement(&a, &b, self::direction(direction)?, pairing).map_err(err)
}

/// (questions * repetitions, whether that is below the reporting floor).
#[pyfunction]
fn effective_set_size(questions: u64, repetitions: u64) -> PyResult<(u64, bool)> {
    let s = stats::effective_set_size(questions, repetitions).map_err(err)?;
    Ok((s.size, s.flagged))
}

/// Comparison table from problem,direction,method,score CSV text.
#[pyfunction]
#[pyo3(signature = (csv, unranked=Vec::new()))]
fn report_table(csv: &str, unranked: Vec<String>) -> PyResult<String> {
    let entries = ScoreEntry::from_csv(csv.as_bytes(), "scores").map_err(err)?;
    Ok(ReportTable::build(entries, &unranked).map_err(err)?.to_text())
}

/// Runs a config file and writes the archive to `output`. Returns
/// (best score or None, spend in the budget unit).
#[pyfunction]
fn run(py: Python<'_>, config: PathBuf, output: PathBuf) -> PyResult<(Option<f64>, f64)> {
    let cfg = RunConfig::load(&config).map_err(err)?;
    let outcome = py.detach(|| execute(&cfg, &output)).map_err(err)?;
    Ok((outcome.best_score, outcome.spend))
}

#[pymodule(name = "evobase")]
fn evobase_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(verify_circles, m)?)?;
    m.add_function(wrap_pyfunction!(pass_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(scs_match_probability, m)?)?;
    m.add_function(wrap_pyfunction!(probability_of_dominance, m)?)?;
    m.add_function(wrap_pyfunction!(probability_of_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(effective_set_size, m)?)?;
    m.add_function(wrap_pyfunction!(report_table, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
