//! Staged re-evaluation of candidates whose scores are noisy.
//!
//! Every candidate is first scored with a few repetitions. A candidate moves
//! to the next level only if its probability of dominance against the pooled
//! scores of the current incumbents (the best few candidates by mean) clears
//! the level's threshold. Survivors are topped up to the next level's
//! repetition count, so earlier scores are reused. The last level ranks the
//! survivors by probability of dominance against each other.

use std::io::Write;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::Direction;
use crate::stats::{probability_of_dominance, DominanceMode, ScoreMatrix, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeLevel {
    pub repetitions: u32,
    /// Minimum probability of dominance over the incumbents to move on.
    /// Unused on the last level.
    pub promotion_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub levels: Vec<CascadeLevel>,
    pub incumbent_pool_size: usize,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            levels: vec![
                CascadeLevel {
                    repetitions: 3,
                    promotion_threshold: 0.25,
                },
                CascadeLevel {
                    repetitions: 10,
                    promotion_threshold: 0.25,
                },
            ],
            incumbent_pool_size: 5,
            seed: 0,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: &str| Err(StatsError::Invalid(m.into()));
        if self.levels.len() < 2 {
            return bad("a cascade needs at least two levels");
        }
        if self.levels[0].repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.levels.windows(2).any(|w| w[1].repetitions <= w[0].repetitions) {
            return bad("repetitions must strictly increase across levels");
        }
        if self.levels.iter().any(|l| !(0.0..=1.0).contains(&l.promotion_threshold)) {
            return bad("promotion thresholds must lie in [0, 1]");
        }
        if self.incumbent_pool_size == 0 {
            return bad("the incumbent pool needs at least one member");
        }
        Ok(())
    }
}

/// Which repetitions to run: `count` of them starting at `first`, on behalf of `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalRequest {
    pub candidate: usize,
    pub level: usize,
    pub first: u32,
    pub count: u32,
    /// Derived from the cascade seed, the candidate and `first`.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLogEntry {
    pub candidate: usize,
    pub level: usize,
    pub repetition: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub candidate: usize,
    /// Probability of dominance over the other finalists.
    pub dominance: f64,
    pub mean: f64,
    pub repetitions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeOutcome {
    /// Finalists, best first.
    pub ranking: Vec<Ranked>,
    pub log: Vec<ScoreLogEntry>,
    /// Candidates whose evaluation failed, with the level and reason.
    pub dropped: Vec<(usize, usize, String)>,
    /// Candidates screened out at each level.
    pub eliminated: Vec<Vec<usize>>,
    pub evaluations: u64,
}

impl CascadeOutcome {
    pub fn selected(&self) -> Option<usize> {
        self.ranking.first().map(|r| r.candidate)
    }

    /// `candidate,level,repetition,score` rows.
    pub fn write_log_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate", "level", "repetition", "score"])?;
        for e in &self.log {
            w.write_record([
                e.candidate.to_string(),
                e.level.to_string(),
                e.repetition.to_string(),
                e.score.to_string(),
            ])?;
        }
        w.flush()
    }
}

fn request_seed(seed: u64, candidate: usize, first: u32) -> u64 {
    seed ^ (candidate as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (u64::from(first) << 40)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs the cascade over `count` candidates. `evaluate` must return exactly
/// `request.count` finite scores, or an error that drops the candidate.
pub fn run_cascade<F>(
    count: usize,
    evaluate: F,
    cfg: &CascadeConfig,
    direction: Direction,
) -> Result<CascadeOutcome, StatsError>
where
    F: Fn(&EvalRequest) -> Result<Vec<f64>, String> + Sync,
{
    cfg.validate()?;
    if count == 0 {
        return Err(StatsError::Invalid("no candidates".into()));
    }
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); count];
    let mut alive: Vec<usize> = (0..count).collect();
    let mut out = CascadeOutcome {
        ranking: Vec::new(),
        log: Vec::new(),
        dropped: Vec::new(),
        eliminated: Vec::new(),
        evaluations: 0,
    };
    let last = cfg.levels.len() - 1;

    for (level, spec) in cfg.levels.iter().enumerate() {
        let requests: Vec<EvalRequest> = alive
            .iter()
            .map(|&c| {
                let first = scores[c].len() as u32;
                EvalRequest {
                    candidate: c,
                    level,
                    first,
                    count: spec.repetitions - first,
                    seed: request_seed(cfg.seed, c, first),
                }
            })
            .collect();
        let results = crate::stats::parallel_map(requests.len(), |i| evaluate(&requests[i]));
        let mut kept = Vec::with_capacity(alive.len());
        for (req, result) in requests.iter().zip(results) {
            let result = result.and_then(|s| {
                if s.len() != req.count as usize {
                    Err(format!("expected {} scores, got {}", req.count, s.len()))
                } else if s.iter().any(|v| !v.is_finite()) {
                    Err("non-finite score".into())
                } else {
                    Ok(s)
                }
            });
            match result {
                Ok(s) => {
                    out.evaluations += s.len() as u64;
                    for (j, v) in s.iter().enumerate() {
                        out.log.push(ScoreLogEntry {
                            candidate: req.candidate,
                            level,
                            repetition: req.first + j as u32,
                            score: *v,
                        });
                    }
                    scores[req.candidate].extend(s);
                    kept.push(req.candidate);
                }
                Err(reason) => {
                    warn!("cascade: dropping candidate {} at level {level}: {reason}", req.candidate);
                    out.dropped.push((req.candidate, level, reason));
                }
            }
        }
        alive = kept;
        if alive.is_empty() {
            break;
        }
        if level == last {
            break;
        }

        // incumbents: best means at this level, earlier index first on ties
        let mut by_mean = alive.clone();
        by_mean.sort_by(|&a, &b| {
            let (ma, mb) = (direction.orient(mean(&scores[a])), direction.orient(mean(&scores[b])));
            mb.total_cmp(&ma).then(a.cmp(&b))
        });
        let pool: Vec<usize> = by_mean.into_iter().take(cfg.incumbent_pool_size).collect();
        let mut promoted = Vec::new();
        let mut eliminated = Vec::new();
        for &c in &alive {
            let others: Vec<f64> = pool
                .iter()
                .filter(|&&p| p != c)
                .flat_map(|&p| scores[p].iter().copied())
                .collect();
            let pass = others.is_empty() || {
                let m = ScoreMatrix::new(
                    vec!["candidate".into(), "incumbents".into()],
                    vec![scores[c].clone(), others],
                    direction,
                )?;
                probability_of_dominance(&m, 0, DominanceMode::Exact)?.value >= spec.promotion_threshold
            };
            if pass {
                promoted.push(c);
            } else {
                eliminated.push(c);
            }
        }
        out.eliminated.push(eliminated);
        alive = promoted;
    }

    out.ranking = rank(&alive, &scores, direction)?;
    Ok(out)
}

fn rank(finalists: &[usize], scores: &[Vec<f64>], direction: Direction) -> Result<Vec<Ranked>, StatsError> {
    let mut ranked: Vec<Ranked> = if finalists.len() == 1 {
        let c = finalists[0];
        vec![Ranked {
            candidate: c,
            dominance: 1.0,
            mean: mean(&scores[c]),
            repetitions: scores[c].len() as u32,
        }]
    } else {
        let m = ScoreMatrix::new(
            finalists.iter().map(|c| c.to_string()).collect(),
            finalists.iter().map(|&c| scores[c].clone()).collect(),
            direction,
        )?;
        finalists
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                Ok(Ranked {
                    candidate: c,
                    dominance: probability_of_dominance(&m, i, DominanceMode::Exact)?.value,
                    mean: mean(&scores[c]),
                    repetitions: scores[c].len() as u32,
                })
            })
            .collect::<Result<_, StatsError>>()?
    };
    ranked.sort_by(|a, b| {
        b.dominance
            .total_cmp(&a.dominance)
            .then(direction.orient(b.mean).total_cmp(&direction.orient(a.mean)))
            .then(a.candidate.cmp(&b.candidate))
    });
    Ok(ranked)
}

/// Candidates whose scores are their true mean plus Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCandidates {
    pub means: Vec<f64>,
    pub noise: f64,
}

impl SyntheticCandidates {
    /// `top` candidates with mean `high`, the rest with mean `low`, in
    /// positions scattered by `seed`.
    pub fn two_tier(count: usize, top: usize, high: f64, low: f64, noise: f64, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut means: Vec<f64> = (0..count).map(|i| if i < top { high } else { low }).collect();
        means.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { means, noise }
    }

    pub fn evaluate(&self, req: &EvalRequest) -> Result<Vec<f64>, String> {
        let normal = Normal::new(self.means[req.candidate], self.noise).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        Ok((0..req.count).map(|_| normal.sample(&mut rng)).collect())
    }
}

/// Settings of the two-tier synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSettings {
    pub candidates: usize,
    pub top: usize,
    pub high: f64,
    pub low: f64,
    pub noise: f64,
    pub simulations: usize,
    pub seed: u64,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            candidates: 50,
            top: 5,
            high: 0.6,
            low: 0.5,
            noise: 0.15,
            simulations: 200,
            seed: 0,
        }
    }
}

/// How often each selection rule picked a top-tier candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub simulations: usize,
    pub cascade_hits: usize,
    /// Argmax of the mean over the first level's repetitions only.
    pub single_level_hits: usize,
    pub cascade_evaluations: u64,
    pub single_level_evaluations: u64,
    /// What scoring every candidate at the last level's repetitions costs.
    pub uniform_evaluations: u64,
}

impl BenchmarkResult {
    pub fn cascade_rate(&self) -> f64 {
        self.cascade_hits as f64 / self.simulations as f64
    }

    pub fn single_level_rate(&self) -> f64 {
        self.single_level_hits as f64 / self.simulations as f64
    }

    pub fn mean_cascade_evaluations(&self) -> f64 {
        self.cascade_evaluations as f64 / self.simulations as f64
    }
}

/// Repeats the cascade and single-level selection on fresh two-tier
/// candidate sets. Both rules see the same first-level scores.
pub fn synthetic_benchmark(cfg: &CascadeConfig, s: &BenchmarkSettings) -> Result<BenchmarkResult, StatsError> {
    cfg.validate()?;
    if s.candidates == 0 || s.top > s.candidates || s.simulations == 0 {
        return Err(StatsError::Invalid(
            "need at least one candidate and simulation, and top <= candidates".into(),
        ));
    }
    if !(s.high > s.low) {
        return Err(StatsError::Invalid("the top tier must have the higher mean".into()));
    }
    let first = cfg.levels[0].repetitions;
    let runs = crate::stats::parallel_map(s.simulations, |i| {
        let sim_seed = s.seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let cands = SyntheticCandidates::two_tier(s.candidates, s.top, s.high, s.low, s.noise, sim_seed);
        let sim_cfg = CascadeConfig {
            seed: sim_seed.rotate_left(17),
            ..cfg.clone()
        };
        let evaluate = |r: &EvalRequest| cands.evaluate(r);
        let out = run_cascade(s.candidates, evaluate, &sim_cfg, Direction::Maximize)?;
        let mut single = None;
        for c in 0..s.candidates {
            let req = EvalRequest {
                candidate: c,
                level: 0,
                first: 0,
                count: first,
                seed: request_seed(sim_cfg.seed, c, 0),
            };
            let m = mean(&cands.evaluate(&req).map_err(StatsError::Invalid)?);
            if single.is_none_or(|(_, b)| m > b) {
                single = Some((c, m));
            }
        }
        let top = |c: Option<usize>| c.is_some_and(|c| cands.means[c] == s.high);
        Ok::<_, StatsError>((top(out.selected()), top(single.map(|(c, _)| c)), out.evaluations))
    });
    let mut r = BenchmarkResult {
        simulations: s.simulations,
        cascade_hits: 0,
        single_level_hits: 0,
        cascade_evaluations: 0,
        single_level_evaluations: (s.simulations * s.candidates) as u64 * u64::from(first),
        uniform_evaluations: (s.simulations * s.candidates) as u64
            * u64::from(cfg.levels.last().expect("validated").repetitions),
    };
    for run in runs {
        let (c, single, evals) = run?;
        r.cascade_hits += usize::from(c);
        r.single_level_hits += usize::from(single);
        r.cascade_evaluations += evals;
    }
    Ok(r)
}
