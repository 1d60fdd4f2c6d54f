//! Derivative-free search over Hermite coefficients.
//!
//! The search runs in coordinates where the basis functions
//! `B_{4n}(t) exp(-t^2/2)` are orthonormal. The constraint `p(0) = 0` is a
//! hyperplane there, so a point is `x` in `R^k` mapped through an
//! orthonormal basis of that hyperplane, and since the score is invariant
//! under positive scaling `x` is kept on the unit sphere. Polls use a freshly
//! rotated orthonormal direction set each sweep, grow the step after a
//! success, follow successful sweeps with pattern moves, and halve the step
//! after a sweep without improvement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::verifiers::{basis_conversion_factor, score_uncertainty, HermiteBasis, HermiteCandidate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HermiteOptConfig {
    pub basis: HermiteBasis,
    /// Highest term index; the candidate has `k + 1` coefficients.
    pub k: usize,
    pub restarts: u32,
    /// Poll sweeps per restart.
    pub iteration_budget: u32,
    pub seed: u64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for HermiteOptConfig {
    fn default() -> Self {
        Self {
            basis: HermiteBasis::Physicist,
            k: 3,
            restarts: 64,
            iteration_budget: 5000,
            seed: 0,
            initial_step: 0.5,
            min_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteOptResult {
    /// Best candidate seen, scaled so the leading coefficient has magnitude 1.
    pub candidate: HermiteCandidate,
    /// Its score; infinite when no valid candidate was found.
    pub score: f64,
    pub evaluations: u64,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// First `want` orthonormal vectors from modified Gram-Schmidt over
/// `vectors`; near-dependent inputs are skipped.
fn gram_schmidt(vectors: impl IntoIterator<Item = Vec<f64>>, want: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(want + 1);
    for mut v in vectors {
        for u in &out {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            out.push(v);
        }
        if out.len() == want {
            break;
        }
    }
    out
}

struct Objective {
    basis: HermiteBasis,
    k: usize,
    /// `1 / ||H_{4n}(t) exp(-t^2/2)||` for the physicist basis.
    inv_norm: Vec<f64>,
    /// Rows span the hyperplane `p(0) = 0` in orthonormal coordinates.
    plane: Vec<Vec<f64>>,
}

impl Objective {
    fn new(basis: HermiteBasis, k: usize) -> Self {
        // ||H_m||^2 = 2^m m! sqrt(pi) and H_m(0) = (-1)^(m/2) m! / (m/2)! for even m
        let mut inv_norm = Vec::with_capacity(k + 1);
        let mut at_zero = Vec::with_capacity(k + 1);
        for n in 0..=k {
            let m = 4 * n;
            let fact_m: f64 = (1..=m).map(|i| i as f64).product();
            let fact_half: f64 = (1..=m / 2).map(|i| i as f64).product();
            let norm = (2f64.powi(m as i32) * fact_m * std::f64::consts::PI.sqrt()).sqrt();
            inv_norm.push(1.0 / norm);
            at_zero.push(fact_m / fact_half / norm);
        }
        let units = (0..=k).map(|i| {
            let mut e = vec![0.0; k + 1];
            e[i] = 1.0;
            e
        });
        let mut plane = gram_schmidt(std::iter::once(at_zero).chain(units), k + 1);
        plane.remove(0);
        Self {
            basis,
            k,
            inv_norm,
            plane,
        }
    }

    fn candidate(&self, x: &[f64]) -> HermiteCandidate {
        let mut coefficients = vec![0.0; self.k + 1];
        for (xi, row) in x.iter().zip(&self.plane) {
            coefficients.iter_mut().zip(row).for_each(|(c, r)| *c += xi * r);
        }
        for (n, c) in coefficients.iter_mut().enumerate() {
            *c *= self.inv_norm[n];
            if self.basis == HermiteBasis::Probabilist {
                *c *= basis_conversion_factor(n);
            }
        }
        let lead = coefficients[self.k].abs();
        if lead > 0.0 {
            coefficients.iter_mut().for_each(|c| *c /= lead);
        }
        HermiteCandidate::new(coefficients, self.basis)
    }

    fn score(&self, x: &[f64]) -> f64 {
        score_uncertainty(&self.candidate(x)).unwrap_or(f64::INFINITY)
    }
}

struct Local {
    x: Vec<f64>,
    score: f64,
    evaluations: u64,
}

fn random_unit(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);
    v
}

fn pattern_search(obj: &Objective, start: Vec<f64>, cfg: &HermiteOptConfig, rng: &mut ChaCha8Rng) -> Local {
    let k = start.len();
    let mut x = start;
    let mut fx = obj.score(&x);
    let mut evaluations = 1;
    let mut step = cfg.initial_step;
    let trial = |y: &mut Vec<f64>, evaluations: &mut u64| {
        normalize(y);
        *evaluations += 1;
        obj.score(y)
    };
    for _ in 0..cfg.iteration_budget {
        if step < cfg.min_step {
            break;
        }
        let directions = gram_schmidt((0..k).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()), k);
        let base = x.clone();
        let mut improved = false;
        for d in &directions {
            for sign in [1.0, -1.0] {
                let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + sign * step * b).collect();
                let fy = trial(&mut y, &mut evaluations);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if improved {
            let mut from = base;
            loop {
                let mut y: Vec<f64> = x.iter().zip(&from).map(|(a, b)| 2.0 * a - b).collect();
                let fy = trial(&mut y, &mut evaluations);
                if fy < fx {
                    from = std::mem::replace(&mut x, y);
                    fx = fy;
                } else {
                    break;
                }
            }
            step = (2.0 * step).min(1.0);
        } else {
            step *= 0.5;
        }
    }
    Local { x, score: fx, evaluations }
}

fn restart_rng(seed: u64, restart: u32) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..12].copy_from_slice(&restart.to_le_bytes());
    ChaCha8Rng::from_seed(s)
}

/// Random-restart pattern search minimizing the uncertainty score. Restarts
/// run on all available cores; the result depends only on the configuration.
/// With a zero iteration budget and one restart the repaired initial sample
/// is returned.
pub fn optimize_hermite(cfg: &HermiteOptConfig) -> HermiteOptResult {
    assert!(cfg.k >= 1, "k must be at least 1");
    let obj = Objective::new(cfg.basis, cfg.k);
    let restarts = cfg.restarts.max(1);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(restarts as usize);

    let mut results: Vec<(u32, Local)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let obj = &obj;
                s.spawn(move || {
                    (0..restarts)
                        .filter(|r| *r as usize % threads == t)
                        .map(|r| {
                            let mut rng = restart_rng(cfg.seed, r);
                            let start = random_unit(&mut rng, cfg.k);
                            (r, pattern_search(obj, start, cfg, &mut rng))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("restart thread panicked")).collect()
    });
    results.sort_by_key(|(r, _)| *r);

    let evaluations = results.iter().map(|(_, l)| l.evaluations).sum();
    let best = results
        .into_iter()
        .map(|(_, l)| l)
        .reduce(|a, b| if b.score < a.score { b } else { a })
        .expect("at least one restart");
    let raw = obj.candidate(&best.x);
    let candidate = raw.repaired().unwrap_or(raw);
    HermiteOptResult {
        candidate,
        score: best.score,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_satisfy_the_constraint() {
        for basis in [HermiteBasis::Physicist, HermiteBasis::Probabilist] {
            let obj = Objective::new(basis, 3);
            let c = obj.candidate(&[0.7, -1.2, 0.4]);
            assert_eq!(c.coefficients[3].abs(), 1.0);
            assert!(c.repaired().is_ok());
        }
    }

    #[test]
    fn zero_budget_returns_initial_sample() {
        let cfg = HermiteOptConfig {
            restarts: 1,
            iteration_budget: 0,
            seed: 5,
            ..Default::default()
        };
        let r = optimize_hermite(&cfg);
        let mut rng = restart_rng(5, 0);
        let start = random_unit(&mut rng, 3);
        let obj = Objective::new(HermiteBasis::Physicist, 3);
        assert_eq!(r.candidate, obj.candidate(&start).repaired().unwrap());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = HermiteOptConfig {
            restarts: 4,
            iteration_budget: 50,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(optimize_hermite(&cfg), optimize_hermite(&cfg));
    }
}
