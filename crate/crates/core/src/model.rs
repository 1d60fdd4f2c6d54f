//! Domain types shared across the harness: problems, candidates, outcomes
//! and the tolerance-aware score comparison used everywhere results are ranked.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance of [`equal_scores`].
pub const SCORE_ATOL: f64 = 1e-8;
/// Relative tolerance of [`equal_scores`].
pub const SCORE_RTOL: f64 = 1e-5;

/// Default wall-clock limit for one candidate evaluation, in seconds.
pub const DEFAULT_TIME_LIMIT: f64 = 300.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("invalid score: {0} is not a number")]
    NotANumber(f64),
}

/// Whether larger or smaller bounds are tighter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn arrow(self) -> char {
        match self {
            Direction::Maximize => '↑',
            Direction::Minimize => '↓',
        }
    }

    /// Maps a score so that larger is always better.
    pub fn orient(self, score: f64) -> f64 {
        match self {
            Direction::Maximize => score,
            Direction::Minimize => -score,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Maximize => f.write_str("maximize"),
            Direction::Minimize => f.write_str("minimize"),
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "maximize" | "max" | "up" | "↑" => Ok(Direction::Maximize),
            "minimize" | "min" | "down" | "↓" => Ok(Direction::Minimize),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

fn check(v: f64) -> Result<f64, ScoreError> {
    if v.is_nan() {
        Err(ScoreError::NotANumber(v))
    } else {
        Ok(v)
    }
}

/// `|a - b| <= atol + rtol * |b|`, the same (asymmetric) rule as `numpy.isclose`
/// with its default tolerances.
pub fn equal_scores(a: f64, b: f64) -> Result<bool, ScoreError> {
    let (a, b) = (check(a)?, check(b)?);
    if a == b {
        return Ok(true);
    }
    Ok((a - b).abs() <= SCORE_ATOL + SCORE_RTOL * b.abs())
}

/// `a` is strictly better than `b` in `direction`; tolerance-equal pairs are not better.
pub fn better(a: f64, b: f64, direction: Direction) -> Result<bool, ScoreError> {
    if equal_scores(a, b)? {
        return Ok(false);
    }
    Ok(match direction {
        Direction::Maximize => a > b,
        Direction::Minimize => a < b,
    })
}

/// `a` matches (within tolerance) or beats `b`.
pub fn matches_or_exceeds(a: f64, b: f64, direction: Direction) -> Result<bool, ScoreError> {
    Ok(equal_scores(a, b)? || better(a, b, direction)?)
}

/// A bounds problem the harness knows how to prompt for and verify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub direction: Direction,
    pub verifier_id: String,
    pub solution_schema_id: String,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    pub prompt_template_path: PathBuf,
    /// Python prepended to every candidate, for helpers the prompt promises.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prelude_path: Option<PathBuf>,
    #[serde(default)]
    pub reference_bounds: BTreeMap<String, f64>,
}

fn default_time_limit() -> f64 {
    DEFAULT_TIME_LIMIT
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("time limit must be positive, got {0}")]
    TimeLimit(f64),
    #[error("problem `{problem}` references unregistered verifier `{id}`")]
    UnknownVerifier { problem: String, id: String },
    #[error("problem `{problem}` references unregistered solution schema `{id}`")]
    UnknownSchema { problem: String, id: String },
}

impl ProblemSpec {
    /// Checks the invariants that do not depend on a registry.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if !(self.time_limit > 0.0) || !self.time_limit.is_finite() {
            return Err(ProblemError::TimeLimit(self.time_limit));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationStatus {
    Success,
    ParseFailure,
    RuntimeError,
    Timeout,
    InvalidSolution,
}

impl fmt::Display for EvaluationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvaluationStatus::Success => "success",
            EvaluationStatus::ParseFailure => "parse_failure",
            EvaluationStatus::RuntimeError => "runtime_error",
            EvaluationStatus::Timeout => "timeout",
            EvaluationStatus::InvalidSolution => "invalid_solution",
        };
        f.write_str(s)
    }
}

/// Result of running and verifying one candidate. `score` is always the
/// harness verifier's value, never something the candidate reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub status: EvaluationStatus,
    pub score: Option<f64>,
    pub solution: Option<serde_json::Value>,
    #[serde(default)]
    pub stderr_excerpt: String,
    pub wall_time: f64,
}

impl EvaluationOutcome {
    pub fn success(score: f64, solution: serde_json::Value, wall_time: f64) -> Self {
        Self {
            status: EvaluationStatus::Success,
            score: Some(score),
            solution: Some(solution),
            stderr_excerpt: String::new(),
            wall_time,
        }
    }

    pub fn failure(status: EvaluationStatus, stderr_excerpt: impl Into<String>, wall_time: f64) -> Self {
        debug_assert_ne!(status, EvaluationStatus::Success);
        Self {
            status,
            score: None,
            solution: None,
            stderr_excerpt: stderr_excerpt.into(),
            wall_time,
        }
    }

    /// Score is present iff the status is success.
    pub fn is_consistent(&self) -> bool {
        (self.status == EvaluationStatus::Success)
            == self.score.is_some_and(|s| s.is_finite())
    }

    pub fn succeeded(&self) -> bool {
        self.status == EvaluationStatus::Success
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub thinking_tokens: u64,
}

/// One generated program together with its lineage, cost and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    /// Position in creation order; archives are totally ordered by it.
    pub seq: u64,
    pub trial_index: u32,
    pub generation_index: u32,
    #[serde(default)]
    pub parent_ids: Vec<String>,
    pub source_text: String,
    pub prompt_digest: String,
    #[serde(flatten)]
    pub usage: TokenUsage,
    pub dollar_cost: f64,
    pub created_at: DateTime<Utc>,
    pub outcome: Option<EvaluationOutcome>,
}

impl CandidateRecord {
    pub fn score(&self) -> Option<f64> {
        self.outcome.as_ref().filter(|o| o.succeeded()).and_then(|o| o.score)
    }

    pub fn succeeded(&self) -> bool {
        self.score().is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_scores_examples() {
        assert!(equal_scores(2.63598, 2.63598).unwrap());
        assert!(equal_scores(1.0, 1.0 + 5e-6).unwrap());
        assert!(!equal_scores(1.0, 1.0 + 2e-5).unwrap());
    }

    #[test]
    fn equal_scores_is_asymmetric_in_b() {
        // tolerance scales with |b| only
        let a = 0.0;
        let b = 1e-3;
        let tol_b = SCORE_ATOL + SCORE_RTOL * b;
        assert_eq!(equal_scores(a, b).unwrap(), (a - b).abs() <= tol_b);
        let a = 100.0;
        let b = 100.0 + 100.0 * SCORE_RTOL * 0.999;
        assert!(equal_scores(a, b).unwrap());
    }

    #[test]
    fn better_respects_direction() {
        assert!(better(0.3482, 0.3521, Direction::Minimize).unwrap());
        assert!(!better(0.3482, 0.3521, Direction::Maximize).unwrap());
        assert!(!better(1.0, 1.0 + 5e-6, Direction::Minimize).unwrap());
        assert!(!better(1.0 + 5e-6, 1.0, Direction::Maximize).unwrap());
    }

    #[test]
    fn nan_is_rejected() {
        assert!(equal_scores(f64::NAN, 1.0).is_err());
        assert!(better(1.0, f64::NAN, Direction::Maximize).is_err());
    }

    #[test]
    fn infinities_compare() {
        assert!(equal_scores(f64::INFINITY, f64::INFINITY).unwrap());
        assert!(better(f64::INFINITY, 1.0, Direction::Maximize).unwrap());
    }

    #[test]
    fn problem_time_limit_must_be_positive() {
        let mut p = ProblemSpec {
            name: "x".into(),
            direction: Direction::Maximize,
            verifier_id: "v".into(),
            solution_schema_id: "s".into(),
            time_limit: 0.0,
            prompt_template_path: "t.md".into(),
            prelude_path: None,
            reference_bounds: BTreeMap::new(),
        };
        assert_eq!(p.validate(), Err(ProblemError::TimeLimit(0.0)));
        p.time_limit = 1.0;
        assert!(p.validate().is_ok());
    }

    proptest::proptest! {
        #[test]
        fn equal_scores_reflexive_symmetric_literal(a in -1e6f64..1e6, b in -1e6f64..1e6) {
            proptest::prop_assert!(equal_scores(a, a).unwrap());
            let literal = (a - b).abs() <= SCORE_ATOL + SCORE_RTOL * b.abs();
            proptest::prop_assert_eq!(equal_scores(a, b).unwrap(), literal);
            // strictly-better is antisymmetric
            let d = Direction::Maximize;
            proptest::prop_assert!(!(better(a, b, d).unwrap() && better(b, a, d).unwrap()));
        }
    }
}
