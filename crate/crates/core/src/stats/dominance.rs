use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, ScoreMatrix, StatsError};
use crate::model::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominanceMode {
    /// Average over every combination of one sample per method.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// A probability with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Probability that one draw from method `focus` beats one draw from every
/// other method. When several methods share the top value the credit is split
/// evenly among them. Ties are exact equality of scores.
pub fn probability_of_dominance(
    scores: &ScoreMatrix,
    focus: usize,
    mode: DominanceMode,
) -> Result<Estimate, StatsError> {
    scores.validate()?;
    let m = scores.samples.len();
    if m < 2 {
        return invalid("dominance needs at least two methods");
    }
    if focus >= m {
        return invalid(format!("focus {focus} out of range for {m} methods"));
    }
    let s = scores.oriented();
    match mode {
        DominanceMode::Exact => Ok(Estimate {
            value: exact(&s, focus),
            std_error: 0.0,
        }),
        DominanceMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return invalid("Monte Carlo mode needs at least two samples");
            }
            Ok(monte_carlo(&s, focus, samples, seed))
        }
    }
}

fn exact(s: &[Vec<f64>], focus: usize) -> f64 {
    let mut total = 0.0;
    for &a in &s[focus] {
        // distribution of the number of other methods tied with `a`, given none exceeds it
        let mut ties = vec![1.0];
        for (j, other) in s.iter().enumerate() {
            if j == focus {
                continue;
            }
            let n = other.len() as f64;
            let less = other.iter().filter(|&&x| x < a).count() as f64 / n;
            let equal = other.iter().filter(|&&x| x == a).count() as f64 / n;
            let mut next = vec![0.0; ties.len() + 1];
            for (t, p) in ties.iter().enumerate() {
                next[t] += p * less;
                next[t + 1] += p * equal;
            }
            ties = next;
        }
        total += ties.iter().enumerate().map(|(t, p)| p / (t + 1) as f64).sum::<f64>();
    }
    total / s[focus].len() as f64
}

fn monte_carlo(s: &[Vec<f64>], focus: usize, samples: usize, seed: u64) -> Estimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut draw = vec![0.0; s.len()];
    for _ in 0..samples {
        for (d, method) in draw.iter_mut().zip(s) {
            *d = method[rng.random_range(0..method.len())];
        }
        let top = draw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let credit = if draw[focus] == top {
            1.0 / draw.iter().filter(|&&x| x == top).count() as f64
        } else {
            0.0
        };
        sum += credit;
        sum_sq += credit * credit;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Every sample of `a` against every sample of `b`.
    #[default]
    AllPairs,
    /// `a[i]` against `b[i]` only.
    IndexPaired,
}

/// Probability that a run of `a` beats a run of `b`, ties counting one half.
pub fn probability_of_improvement(
    a: &[f64],
    b: &[f64],
    direction: Direction,
    pairing: Pairing,
) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return invalid("both methods need at least one sample");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("scores must be finite");
    }
    let credit = |x: f64, y: f64| {
        let (x, y) = (direction.orient(x), direction.orient(y));
        if x > y {
            1.0
        } else if x == y {
            0.5
        } else {
            0.0
        }
    };
    match pairing {
        Pairing::AllPairs => {
            let total: f64 = a.iter().map(|&x| b.iter().map(|&y| credit(x, y)).sum::<f64>()).sum();
            Ok(total / (a.len() * b.len()) as f64)
        }
        Pairing::IndexPaired => {
            if a.len() != b.len() {
                return invalid(format!(
                    "index pairing needs equal sample counts, got {} and {}",
                    a.len(),
                    b.len()
                ));
            }
            Ok(a.iter().zip(b).map(|(&x, &y)| credit(x, y)).sum::<f64>() / a.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(samples: Vec<Vec<f64>>) -> ScoreMatrix {
        let methods = (0..samples.len()).map(|i| format!("m{i}")).collect();
        ScoreMatrix::new(methods, samples, Direction::Maximize).unwrap()
    }

    fn pod(m: &ScoreMatrix, focus: usize) -> f64 {
        probability_of_dominance(m, focus, DominanceMode::Exact).unwrap().value
    }

    #[test]
    fn strict_order() {
        let m = matrix(vec![vec![3.0; 4], vec![2.0; 4], vec![1.0; 4]]);
        assert_eq!([pod(&m, 0), pod(&m, 1), pod(&m, 2)], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn identical_methods_split_evenly() {
        let m = matrix(vec![vec![7.0; 3]; 4]);
        for f in 0..4 {
            assert_eq!(pod(&m, f), 0.25);
        }
    }

    #[test]
    fn enumerated_pair() {
        // tuples (1,0) (1,1) (0,0) (0,1): credits 1, 1/2, 1/2, 0
        let m = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(pod(&m, 0), 0.5);
        assert_eq!(pod(&m, 1), 0.5);
    }

    #[test]
    fn minimize_negates() {
        let mut m = matrix(vec![vec![1.0], vec![2.0]]);
        m.direction = Direction::Minimize;
        assert_eq!(pod(&m, 0), 1.0);
    }

    #[test]
    fn errors() {
        let one = matrix(vec![vec![1.0]]);
        assert!(probability_of_dominance(&one, 0, DominanceMode::Exact).is_err());
        let two = matrix(vec![vec![1.0], vec![1.0]]);
        assert!(probability_of_dominance(&two, 2, DominanceMode::Exact).is_err());
    }

    #[test]
    fn improvement_examples() {
        let d = Direction::Maximize;
        for p in [Pairing::AllPairs, Pairing::IndexPaired] {
            assert_eq!(probability_of_improvement(&[1.0, 2.0], &[1.0, 2.0], d, p).unwrap(), 0.5);
            assert_eq!(probability_of_improvement(&[1.0, 2.0], &[0.0, 0.0], d, p).unwrap(), 1.0);
        }
        let a = [2.0, 1.0];
        let b = [1.0, 2.0];
        assert_eq!(probability_of_improvement(&a, &b, d, Pairing::IndexPaired).unwrap(), 0.5);
        let a = [3.0, 1.0];
        let b = [2.0, 0.0];
        assert_eq!(probability_of_improvement(&a, &b, d, Pairing::IndexPaired).unwrap(), 1.0);
        assert_eq!(probability_of_improvement(&a, &b, d, Pairing::AllPairs).unwrap(), 0.75);
        assert!(probability_of_improvement(&[1.0], &[1.0, 2.0], d, Pairing::IndexPaired).is_err());
    }

    #[test]
    fn all_pairs_matches_two_method_dominance() {
        let a = vec![0.3, 0.9, 0.9, 0.1];
        let b = vec![0.9, 0.2, 0.5];
        let m = matrix(vec![a.clone(), b.clone()]);
        let poi = probability_of_improvement(&a, &b, Direction::Maximize, Pairing::AllPairs).unwrap();
        assert!((poi - pod(&m, 0)).abs() < 1e-15);
    }
}
