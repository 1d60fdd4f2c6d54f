use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::{parallel_map, quantile, resample_rng};
use super::{invalid, StatsError};

/// Questions times repetitions below this is too small to report accuracy on.
pub const MIN_EFFECTIVE_SET_SIZE: u64 = 300;

/// The most common answer, ties broken uniformly at random.
pub fn majority_vote<'a, T: Eq + Hash + Ord>(answers: &'a [T], rng: &mut impl Rng) -> Result<&'a T, StatsError> {
    if answers.is_empty() {
        return invalid("no answers to vote on");
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for a in answers {
        *counts.entry(a).or_default() += 1;
    }
    let top = *counts.values().max().expect("non-empty");
    let mut modal: Vec<&T> = counts.into_iter().filter(|(_, c)| *c == top).map(|(a, _)| a).collect();
    // hash order is arbitrary; sort so the draw depends only on the rng
    modal.sort();
    Ok(modal[rng.random_range(0..modal.len())])
}

/// Sampled answers per question, with the correct answer for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPool {
    pub answers: Vec<Vec<String>>,
    pub keys: Vec<String>,
}

impl AnswerPool {
    pub fn validate(&self, k: usize) -> Result<(), StatsError> {
        if self.answers.is_empty() || self.answers.len() != self.keys.len() {
            return invalid("the pool needs one key per question and at least one question");
        }
        if let Some(i) = self.answers.iter().position(|a| a.len() < k.max(1)) {
            return invalid(format!("question {i} has fewer than {k} sampled answers"));
        }
        Ok(())
    }
}

/// Sorted samples of an accuracy estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub values: Vec<f64>,
}

impl Distribution {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn std(&self) -> f64 {
        let m = self.mean();
        let n = self.values.len() as f64;
        (self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile(&self.values, q)
    }

    /// `value,cdf` rows, one per distinct value.
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "cdf"])?;
        let n = self.values.len() as f64;
        for (i, v) in self.values.iter().enumerate() {
            if self.values.get(i + 1) == Some(v) {
                continue;
            }
            w.write_record([v.to_string(), ((i + 1) as f64 / n).to_string()])?;
        }
        w.flush()
    }
}

/// Accuracy of majority vote over `k` answers when every question is asked
/// `repetitions` times. Each resample draws, per question and repetition, `k`
/// answers with replacement from the pool and scores the vote against the key.
pub fn majority_accuracy_distribution(
    pool: &AnswerPool,
    k: usize,
    repetitions: usize,
    resamples: usize,
    seed: u64,
) -> Result<Distribution, StatsError> {
    if k == 0 || repetitions == 0 || resamples == 0 {
        return invalid("k, repetitions and resamples must be at least 1");
    }
    pool.validate(k)?;
    let trials = (pool.answers.len() * repetitions) as f64;
    let mut values = parallel_map(resamples, |r| {
        let mut rng = resample_rng(seed, r as u64);
        let mut drawn: Vec<&str> = Vec::with_capacity(k);
        let mut correct = 0usize;
        for (answers, key) in pool.answers.iter().zip(&pool.keys) {
            for _ in 0..repetitions {
                drawn.clear();
                drawn.extend((0..k).map(|_| answers[rng.random_range(0..answers.len())].as_str()));
                if *majority_vote(&drawn, &mut rng).expect("k >= 1") == key.as_str() {
                    correct += 1;
                }
            }
        }
        correct as f64 / trials
    });
    values.sort_by(f64::total_cmp);
    Ok(Distribution { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveSize {
    pub size: u64,
    /// Below [`MIN_EFFECTIVE_SET_SIZE`].
    pub flagged: bool,
}

/// Questions times repetitions, flagged when below the reporting floor.
pub fn effective_set_size(questions: u64, repetitions: u64) -> Result<EffectiveSize, StatsError> {
    if questions == 0 || repetitions == 0 {
        return invalid("questions and repetitions must be at least 1");
    }
    let size = questions * repetitions;
    Ok(EffectiveSize {
        size,
        flagged: size < MIN_EFFECTIVE_SET_SIZE,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn unanimous_vote() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(*majority_vote(&["42"; 5], &mut rng).unwrap(), "42");
        assert!(majority_vote::<u8>(&[], &mut rng).is_err());
    }

    #[test]
    fn tie_is_a_coin_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let hits = (0..n).filter(|_| *majority_vote(&["a", "b"], &mut rng).unwrap() == "a").count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.02);

        let pool = AnswerPool {
            answers: vec![vec!["right".into(), "wrong".into()]],
            keys: vec!["right".into()],
        };
        // k = 2 drawn with replacement: both right 1/4, split 1/2 (coin flip), both wrong 1/4
        let d = majority_accuracy_distribution(&pool, 2, 1, 20_000, 3).unwrap();
        assert!((d.mean() - 0.5).abs() < 0.02);
    }

    #[test]
    fn effective_sizes() {
        assert_eq!(effective_set_size(30, 10).unwrap(), EffectiveSize { size: 300, flagged: false });
        assert_eq!(effective_set_size(30, 3).unwrap(), EffectiveSize { size: 90, flagged: true });
        assert_eq!(effective_set_size(1, 1).unwrap(), EffectiveSize { size: 1, flagged: true });
        assert!(effective_set_size(0, 3).is_err());
    }

    #[test]
    fn csv_is_a_cdf() {
        let d = Distribution {
            values: vec![0.1, 0.2, 0.2, 0.5],
        };
        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "value,cdf\n0.1,0.25\n0.2,0.75\n0.5,1\n");
        assert!((d.quantile(0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn repetitions_narrow_the_distribution() {
        let pool = AnswerPool {
            answers: (0..30)
                .map(|q| (0..10).map(|i| if i < 3 + q % 5 { "x" } else { "y" }.to_string()).collect())
                .collect(),
            keys: vec!["x".into(); 30],
        };
        let one = majority_accuracy_distribution(&pool, 5, 1, 2000, 1).unwrap();
        let ten = majority_accuracy_distribution(&pool, 5, 10, 2000, 1).unwrap();
        assert!(ten.std() < one.std() / 2.0);
        assert!((ten.mean() - one.mean()).abs() < 0.01);
    }
}
