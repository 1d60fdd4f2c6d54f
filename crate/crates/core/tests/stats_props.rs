//! Estimator invariants checked against brute-force oracles.

use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use evobase::model::{matches_or_exceeds, Direction};
use evobase::stats::{
    pass_at_k, probability_of_dominance, probability_of_improvement, scs_match_probability, BudgetedTrial,
    BudgetedTrialSet, DominanceMode, Pairing, ScoreMatrix,
};

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Average over every ordering of the trials: run them in order, skipping any
/// whose first generation no longer fits, until one hits the target within
/// its affordable prefix or a trial only partly fits.
fn orderings_oracle(set: &BudgetedTrialSet<BigRational>, budget: &BigRational) -> BigRational {
    fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut orders = Vec::new();
    permute(&mut (0..set.trials.len()).collect(), 0, &mut orders);
    let mut total = BigRational::zero();
    for order in &orders {
        let mut left = budget.clone();
        let mut value = BigRational::zero();
        for &i in order {
            let t = &set.trials[i];
            if t.costs[0] > left {
                continue;
            }
            let mut spent = BigRational::zero();
            let mut hit = false;
            let mut complete = true;
            for (c, s) in t.costs.iter().zip(&t.best_scores) {
                if spent.clone() + c > left {
                    complete = false;
                    break;
                }
                spent += c;
                if matches_or_exceeds(*s, set.target, set.direction).unwrap() {
                    hit = true;
                    break;
                }
            }
            if hit {
                value = BigRational::one();
                break;
            }
            if !complete {
                break;
            }
            left -= spent;
        }
        total += value;
    }
    total / BigRational::from_integer(orders.len().into())
}

fn trial_set() -> impl Strategy<Value = (BudgetedTrialSet<BigRational>, BigRational)> {
    let trial = prop::collection::vec((1i64..6, 0u8..4), 1..=3);
    (prop::collection::vec(trial, 1..=5), 0i64..40, 0u8..4, any::<bool>()).prop_map(
        |(trials, budget, target, maximize)| {
            let trials = trials
                .into_iter()
                .map(|gens| BudgetedTrial {
                    costs: gens.iter().map(|(c, _)| rational(*c, 2)).collect(),
                    best_scores: gens.iter().map(|(_, s)| *s as f64).collect(),
                })
                .collect();
            let direction = if maximize { Direction::Maximize } else { Direction::Minimize };
            (
                BudgetedTrialSet {
                    trials,
                    target: target as f64,
                    direction,
                },
                rational(budget, 3),
            )
        },
    )
}

fn score_matrix() -> impl Strategy<Value = ScoreMatrix> {
    (2usize..=4, 1usize..=6).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop::collection::vec(0u8..4, 1..=n), m).prop_map(|samples| {
            let methods = (0..samples.len()).map(|i| format!("m{i}")).collect();
            let samples = samples.into_iter().map(|s| s.into_iter().map(f64::from).collect()).collect();
            ScoreMatrix::new(methods, samples, Direction::Maximize).unwrap()
        })
    })
}

/// Direct average over every index tuple.
fn tuples_oracle(m: &ScoreMatrix, focus: usize) -> f64 {
    let sizes: Vec<usize> = m.samples.iter().map(Vec::len).collect();
    let mut idx = vec![0usize; sizes.len()];
    let (mut total, mut count) = (0.0, 0usize);
    loop {
        let draw: Vec<f64> = idx.iter().zip(&m.samples).map(|(&i, s)| s[i]).collect();
        let top = draw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if draw[focus] == top {
            total += 1.0 / draw.iter().filter(|&&x| x == top).count() as f64;
        }
        count += 1;
        let mut d = 0;
        loop {
            if d == idx.len() {
                return total / count as f64;
            }
            idx[d] += 1;
            if idx[d] < sizes[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

proptest! {
    #[test]
    fn scs_recursion_matches_orderings((set, budget) in trial_set()) {
        prop_assert_eq!(scs_match_probability(&set, &budget).unwrap(), orderings_oracle(&set, &budget));
    }

    #[test]
    fn dominance_matches_tuples_and_sums_to_one(m in score_matrix()) {
        let mut sum = 0.0;
        for f in 0..m.methods.len() {
            let p = probability_of_dominance(&m, f, DominanceMode::Exact).unwrap().value;
            prop_assert!((p - tuples_oracle(&m, f)).abs() < 1e-12);
            sum += p;
        }
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominance_is_a_rank_statistic(m in score_matrix(), shift in -5.0f64..5.0) {
        let mut t = m.clone();
        for s in &mut t.samples {
            for v in s.iter_mut() {
                *v = (*v + shift).exp() * 3.0 + v.powi(3);
            }
        }
        for f in 0..m.methods.len() {
            let a = probability_of_dominance(&m, f, DominanceMode::Exact).unwrap().value;
            let b = probability_of_dominance(&t, f, DominanceMode::Exact).unwrap().value;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn improvement_is_antisymmetric(
        a in prop::collection::vec(0u8..5, 1..8),
        b in prop::collection::vec(0u8..5, 1..8),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = probability_of_improvement(&a, &b, Direction::Maximize, Pairing::AllPairs).unwrap();
        let ba = probability_of_improvement(&b, &a, Direction::Maximize, Pairing::AllPairs).unwrap();
        prop_assert!((ab + ba - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pass_at_k_matches_subset_enumeration(n in 1u64..9, c in 0u64..9, k in 1u64..9) {
        prop_assume!(c <= n && k <= n);
        // hits are items 0..c; count k-subsets (as bitmasks) that contain one
        let (mut hit, mut all) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as u64 == k {
                all += 1;
                if mask & ((1u32 << c) - 1) != 0 {
                    hit += 1;
                }
            }
        }
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!((p - hit as f64 / all as f64).abs() < 1e-12);
    }

    #[test]
    fn pass_at_k_monotone(n in 1u64..300, c in 0u64..300, k in 1u64..300) {
        prop_assume!(c < n && k < n);
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p);
        prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p);
        prop_assert!(pass_at_k(n + 1, c, k).unwrap() <= p);
    }
}
