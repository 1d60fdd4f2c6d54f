use std::collections::HashMap;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use super::{invalid, StatsError};
use crate::model::{matches_or_exceeds, Direction};

/// Trials beyond this count make the subset recursion impractical.
pub const MAX_TRIALS: usize = 24;

/// One restart of a sequential search: cost and best score of each generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetedTrial<T> {
    pub costs: Vec<T>,
    pub best_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetedTrialSet<T> {
    pub trials: Vec<BudgetedTrial<T>>,
    /// Score to match or exceed.
    pub target: f64,
    pub direction: Direction,
}

impl<T: Clone + PartialOrd + Num> BudgetedTrialSet<T> {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.trials.len() > MAX_TRIALS {
            return invalid(format!("at most {MAX_TRIALS} trials are supported, got {}", self.trials.len()));
        }
        if !self.target.is_finite() {
            return invalid("target must be finite");
        }
        for (i, t) in self.trials.iter().enumerate() {
            if t.costs.is_empty() || t.costs.len() != t.best_scores.len() {
                return invalid(format!("trial {i} needs one cost and one score per generation, at least one"));
            }
            if t.costs.iter().any(|c| *c <= T::zero()) {
                return invalid(format!("trial {i} has a non-positive generation cost"));
            }
            if t.best_scores.iter().any(|s| s.is_nan()) {
                return invalid(format!("trial {i} has a NaN score"));
            }
        }
        Ok(())
    }
}

/// Cumulative costs and the first generation whose running best reaches the target.
struct Prepared<T> {
    cumulative: Vec<T>,
    first_hit: Option<usize>,
}

impl<T: Clone + Num> Prepared<T> {
    fn total(&self) -> &T {
        self.cumulative.last().expect("validated non-empty")
    }
}

struct Recursion<'a, T> {
    budget: &'a T,
    trials: Vec<Prepared<T>>,
    memo: HashMap<u32, T>,
}

impl<T: Clone + PartialOrd + Num + FromPrimitive> Recursion<'_, T> {
    /// Budget left once the trials in `removed` have been run to completion.
    fn remaining(&self, removed: u32) -> T {
        let mut r = self.budget.clone();
        for (i, t) in self.trials.iter().enumerate() {
            if removed & (1 << i) != 0 {
                r = r - t.total().clone();
            }
        }
        r
    }

    fn probability(&mut self, removed: u32) -> T {
        if let Some(p) = self.memo.get(&removed) {
            return p.clone();
        }
        let r = self.remaining(removed);
        let mut sum = T::zero();
        let mut count = 0usize;
        for i in 0..self.trials.len() {
            if removed & (1 << i) != 0 {
                continue;
            }
            let t = &self.trials[i];
            if t.cumulative[0] > r {
                continue;
            }
            count += 1;
            let hit = t.first_hit.is_some_and(|g| t.cumulative[g] <= r);
            if hit {
                sum = sum + T::one();
            } else if *t.total() <= r {
                sum = sum + self.probability(removed | (1 << i));
            }
        }
        let p = if count == 0 {
            T::zero()
        } else {
            sum / T::from_usize(count).expect("count is representable")
        };
        self.memo.insert(removed, p.clone());
        p
    }
}

/// Probability of matching or exceeding `set.target` when `budget` is spent
/// on trials drawn uniformly at random, generation by generation, moving to
/// another trial only when the current one is finished.
///
/// At each step the draw is over the trials whose first generation still
/// fits. A trial that reaches the target within its affordable prefix counts
/// as a success; one that does not and fits entirely hands the rest of the
/// budget to the remaining trials; one that only partly fits ends the run.
/// Scores are compared with the usual tolerance.
///
/// Generic over the number type so the recursion can run in exact
/// arithmetic; scores stay `f64`.
pub fn scs_match_probability<T>(set: &BudgetedTrialSet<T>, budget: &T) -> Result<T, StatsError>
where
    T: Clone + PartialOrd + Num + FromPrimitive,
{
    set.validate()?;
    if *budget < T::zero() {
        return invalid("budget must be non-negative");
    }
    let mut trials = Vec::with_capacity(set.trials.len());
    for t in &set.trials {
        let mut cumulative = Vec::with_capacity(t.costs.len());
        let mut acc = T::zero();
        for c in &t.costs {
            acc = acc + c.clone();
            cumulative.push(acc.clone());
        }
        let mut first_hit = None;
        for (g, s) in t.best_scores.iter().enumerate() {
            if matches_or_exceeds(*s, set.target, set.direction).expect("validated") {
                first_hit = Some(g);
                break;
            }
        }
        trials.push(Prepared { cumulative, first_hit });
    }
    let mut rec = Recursion {
        budget,
        trials,
        memo: HashMap::new(),
    };
    Ok(rec.probability(0))
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;

    fn trial(costs: &[f64], scores: &[f64]) -> BudgetedTrial<f64> {
        BudgetedTrial {
            costs: costs.to_vec(),
            best_scores: scores.to_vec(),
        }
    }

    fn set(trials: Vec<BudgetedTrial<f64>>) -> BudgetedTrialSet<f64> {
        BudgetedTrialSet {
            trials,
            target: 1.0,
            direction: Direction::Maximize,
        }
    }

    #[test]
    fn single_affordable_achiever() {
        let s = set(vec![trial(&[1.0, 1.0], &[0.5, 1.0])]);
        assert_eq!(scs_match_probability(&s, &2.0).unwrap(), 1.0);
        // the achieving generation is out of reach
        assert_eq!(scs_match_probability(&s, &1.5).unwrap(), 0.0);
    }

    #[test]
    fn two_trials_one_affordable() {
        let s = set(vec![trial(&[1.0], &[2.0]), trial(&[1.0], &[0.0])]);
        assert_eq!(scs_match_probability(&s, &1.0).unwrap(), 0.5);
        assert_eq!(scs_match_probability(&s, &2.0).unwrap(), 1.0);
    }

    #[test]
    fn three_trials_budget_for_two() {
        let s = set(vec![trial(&[1.0], &[2.0]), trial(&[1.0], &[0.0]), trial(&[1.0], &[0.0])]);
        let p = scs_match_probability(&s, &2.0).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_budget_and_minimize() {
        let s = set(vec![trial(&[1.0], &[2.0])]);
        assert_eq!(scs_match_probability(&s, &0.0).unwrap(), 0.0);
        let mut m = set(vec![trial(&[1.0], &[0.9]), trial(&[1.0], &[1.1])]);
        m.direction = Direction::Minimize;
        assert_eq!(scs_match_probability(&m, &1.0).unwrap(), 0.5);
        assert!(scs_match_probability(&m, &-1.0).is_err());
    }

    #[test]
    fn tolerance_equal_counts_as_match() {
        let s = set(vec![trial(&[1.0], &[1.0 - 1e-9])]);
        assert_eq!(scs_match_probability(&s, &1.0).unwrap(), 1.0);
    }

    #[test]
    fn exact_arithmetic() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let s = BudgetedTrialSet {
            trials: vec![
                BudgetedTrial {
                    costs: vec![r(1, 3), r(1, 3)],
                    best_scores: vec![0.0, 0.0],
                },
                BudgetedTrial {
                    costs: vec![r(1, 2)],
                    best_scores: vec![5.0],
                },
                BudgetedTrial {
                    costs: vec![r(1, 4)],
                    best_scores: vec![0.0],
                },
            ],
            target: 5.0,
            direction: Direction::Maximize,
        };
        // A first: 1/6 left and nothing fits -> 0
        // B first: hit -> 1
        // C first: 7/12 left; A only partly fits -> 0, B -> 1
        let p = scs_match_probability(&s, &r(5, 6)).unwrap();
        assert_eq!(p, r(1, 3) * (r(0, 1) + r(1, 1) + r(1, 2)));
    }
}
