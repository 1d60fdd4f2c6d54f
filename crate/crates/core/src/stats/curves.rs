use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, Interval};
use super::pass_at_k::pass_at_k;
use super::scs::{scs_match_probability, BudgetedTrial, BudgetedTrialSet};
use super::{invalid, StatsError};
use crate::archive::RunArchive;
use crate::budget::BudgetUnit;
use crate::model::{matches_or_exceeds, CandidateRecord, Direction};

/// One independently sampled program: what it cost and what it scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IidSample {
    pub cost: f64,
    pub score: Option<f64>,
}

/// How many programs a budget buys.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Every program costs the mean cost of all sampled programs.
    #[default]
    Average,
    /// The chronological prefix whose actual costs fit. The estimate is then
    /// 0 or 1 for the observed run; resamples vary the programs and their order.
    Actual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub budget: f64,
    pub probability: f64,
    pub lo: f64,
    pub hi: f64,
}

fn record_cost(r: &CandidateRecord, unit: BudgetUnit) -> Result<f64, StatsError> {
    match unit {
        BudgetUnit::Dollars => Ok(r.dollar_cost),
        BudgetUnit::Evaluations => Ok(1.0),
        BudgetUnit::WallClockSeconds => invalid("budget curves are not available in wall-clock seconds"),
    }
}

impl IidSample {
    /// One sample per archive record, in archive order.
    pub fn from_archive(archive: &RunArchive, unit: BudgetUnit) -> Result<Vec<Self>, StatsError> {
        archive
            .records
            .iter()
            .map(|r| {
                Ok(Self {
                    cost: record_cost(r, unit)?,
                    score: r.score(),
                })
            })
            .collect()
    }
}

fn iid_point(samples: &[&IidSample], target: f64, direction: Direction, budget: f64, model: CostModel) -> f64 {
    let n = samples.len();
    let k = match model {
        CostModel::Average => {
            let mean = samples.iter().map(|s| s.cost).sum::<f64>() / n as f64;
            if mean > 0.0 {
                ((budget / mean).floor() as usize).min(n)
            } else {
                n
            }
        }
        CostModel::Actual => {
            let mut spent = 0.0;
            samples
                .iter()
                .take_while(|s| {
                    spent += s.cost;
                    spent <= budget
                })
                .count()
        }
    };
    if k == 0 {
        return 0.0;
    }
    let c = samples
        .iter()
        .filter(|s| s.score.is_some_and(|v| matches_or_exceeds(v, target, direction).unwrap_or(false)))
        .count();
    match model {
        CostModel::Average => pass_at_k(n as u64, c as u64, k as u64).expect("arguments in range"),
        // the prefix is the run that was actually made: it either contains a match or not
        CostModel::Actual => {
            let hit = samples[..k]
                .iter()
                .any(|s| s.score.is_some_and(|v| matches_or_exceeds(v, target, direction).unwrap_or(false)));
            if hit {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn check_budgets(budgets: &[f64]) -> Result<(), StatsError> {
    if budgets.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return invalid("budgets must be finite and non-negative");
    }
    Ok(())
}

/// Probability that independently sampled programs match or exceed `target`
/// within each budget, with a percentile bootstrap interval over programs.
/// Every budget point uses the same resamples, so the interval bounds are
/// monotone in budget like the estimate itself.
#[allow(clippy::too_many_arguments)]
pub fn iid_curve(
    samples: &[IidSample],
    target: f64,
    direction: Direction,
    budgets: &[f64],
    model: CostModel,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>, StatsError> {
    if samples.is_empty() {
        return invalid("no samples");
    }
    if samples.iter().any(|s| !s.cost.is_finite() || s.cost < 0.0 || s.score.is_some_and(f64::is_nan)) {
        return invalid("sample costs must be finite and non-negative, scores not NaN");
    }
    check_budgets(budgets)?;
    let all: Vec<&IidSample> = samples.iter().collect();
    budgets
        .iter()
        .map(|&budget| {
            let probability = iid_point(&all, target, direction, budget, model);
            let ci = bootstrap_ci(
                samples.len(),
                |idx| {
                    let drawn: Vec<&IidSample> = idx.iter().map(|&i| &samples[i]).collect();
                    iid_point(&drawn, target, direction, budget, model)
                },
                resamples,
                level,
                seed,
            )?;
            Ok(point(budget, probability, ci))
        })
        .collect()
}

fn point(budget: f64, probability: f64, ci: Interval) -> CurvePoint {
    CurvePoint {
        budget,
        probability,
        lo: ci.lo,
        hi: ci.hi,
    }
}

/// [`scs_match_probability`] at each budget, with a percentile bootstrap
/// interval over trials drawn with replacement.
pub fn scs_curve(
    set: &BudgetedTrialSet<f64>,
    budgets: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>, StatsError> {
    set.validate()?;
    if set.trials.is_empty() {
        return invalid("no trials");
    }
    check_budgets(budgets)?;
    budgets
        .iter()
        .map(|&budget| {
            let probability = scs_match_probability(set, &budget)?;
            let ci = bootstrap_ci(
                set.trials.len(),
                |idx| {
                    let drawn = BudgetedTrialSet {
                        trials: idx.iter().map(|&i| set.trials[i].clone()).collect(),
                        target: set.target,
                        direction: set.direction,
                    };
                    scs_match_probability(&drawn, &budget).expect("validated above")
                },
                resamples,
                level,
                seed,
            )?;
            Ok(point(budget, probability, ci))
        })
        .collect()
}

/// Groups an archive's records into trials of generations. Each generation's
/// cost is the spend of its records and its score the best success, or the
/// worst possible value when none succeeded.
pub fn trials_from_archive(
    archive: &RunArchive,
    unit: BudgetUnit,
    target: f64,
) -> Result<BudgetedTrialSet<f64>, StatsError> {
    let direction = archive.direction();
    let worst = match direction {
        Direction::Maximize => f64::NEG_INFINITY,
        Direction::Minimize => f64::INFINITY,
    };
    let mut trials: BTreeMap<u32, BTreeMap<u32, (f64, f64)>> = BTreeMap::new();
    for r in &archive.records {
        let cost = record_cost(r, unit)?;
        let g = trials
            .entry(r.trial_index)
            .or_default()
            .entry(r.generation_index)
            .or_insert((0.0, worst));
        g.0 += cost;
        if let Some(s) = r.score() {
            if direction.orient(s) > direction.orient(g.1) {
                g.1 = s;
            }
        }
    }
    let trials = trials
        .into_values()
        .map(|gens| {
            let (costs, best_scores) = gens.into_values().unzip();
            BudgetedTrial { costs, best_scores }
        })
        .collect();
    let set = BudgetedTrialSet {
        trials,
        target,
        direction,
    };
    set.validate()?;
    Ok(set)
}
