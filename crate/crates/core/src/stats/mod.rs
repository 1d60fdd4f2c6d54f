//! Estimators for comparing search methods: pass@k, the budget-limited
//! trial recursion for sequential search, bootstrap intervals, probability of
//! improvement and dominance, and majority-vote accuracy.

mod bootstrap;
mod curves;
mod dominance;
mod majority;
mod pass_at_k;
mod scs;

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bootstrap::{bootstrap_ci, quantile, Interval};
pub(crate) use bootstrap::parallel_map;
pub use curves::{iid_curve, scs_curve, trials_from_archive, CostModel, CurvePoint, IidSample};
pub use dominance::{probability_of_dominance, probability_of_improvement, DominanceMode, Estimate, Pairing};
pub use majority::{
    effective_set_size, majority_accuracy_distribution, majority_vote, AnswerPool, Distribution, EffectiveSize,
    MIN_EFFECTIVE_SET_SIZE,
};
pub use pass_at_k::pass_at_k;
pub use scs::{scs_match_probability, BudgetedTrial, BudgetedTrialSet, MAX_TRIALS};

use crate::model::Direction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("CSV input: {0}")]
    Csv(String),
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T, StatsError> {
    Err(StatsError::Invalid(msg.into()))
}

/// Score samples per method, all on one problem or benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub methods: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub direction: Direction,
}

impl ScoreMatrix {
    pub fn new(methods: Vec<String>, samples: Vec<Vec<f64>>, direction: Direction) -> Result<Self, StatsError> {
        let m = Self {
            methods,
            samples,
            direction,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.methods.len() != self.samples.len() {
            return invalid("one sample list is needed per method");
        }
        for (name, s) in self.methods.iter().zip(&self.samples) {
            if s.is_empty() {
                return invalid(format!("method `{name}` has no samples"));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return invalid(format!("method `{name}` has a non-finite score"));
            }
        }
        Ok(())
    }

    /// Reads `method,run_index,score` rows (header required). Methods keep
    /// their first-appearance order and samples are sorted by run index.
    pub fn from_csv(reader: impl Read, direction: Direction) -> Result<Self, StatsError> {
        #[derive(Deserialize)]
        struct Row {
            method: String,
            run_index: u64,
            score: f64,
        }
        let mut order: Vec<String> = Vec::new();
        let mut by_method: BTreeMap<String, Vec<(u64, f64)>> = BTreeMap::new();
        for (line, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| StatsError::Csv(format!("row {}: {e}", line + 1)))?;
            let runs = by_method.entry(row.method.clone()).or_insert_with(|| {
                order.push(row.method.clone());
                Vec::new()
            });
            if runs.iter().any(|(i, _)| *i == row.run_index) {
                return Err(StatsError::Csv(format!(
                    "duplicate run_index {} for method `{}`",
                    row.run_index, row.method
                )));
            }
            runs.push((row.run_index, row.score));
        }
        if order.is_empty() {
            return Err(StatsError::Csv("no rows".into()));
        }
        let samples = order
            .iter()
            .map(|m| {
                let mut runs = by_method.remove(m).expect("recorded");
                runs.sort_by_key(|(i, _)| *i);
                runs.into_iter().map(|(_, s)| s).collect()
            })
            .collect();
        Self::new(order, samples, direction)
    }

    /// Scores with the direction folded in, so larger is always better.
    pub(crate) fn oriented(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| s.iter().map(|v| self.direction.orient(*v)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_ingestion() {
        let text = "method,run_index,score\nb,1,0.5\na,0,2\nb,0,0.25\n";
        let m = ScoreMatrix::from_csv(text.as_bytes(), Direction::Maximize).unwrap();
        assert_eq!(m.methods, ["b", "a"]);
        assert_eq!(m.samples, [vec![0.25, 0.5], vec![2.0]]);
        let dup = "method,run_index,score\na,0,1\na,0,2\n";
        assert!(ScoreMatrix::from_csv(dup.as_bytes(), Direction::Maximize).is_err());
        let bad = "method,run_index,score\na,0,nan\n";
        assert!(ScoreMatrix::from_csv(bad.as_bytes(), Direction::Maximize).is_err());
    }
}
