use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{invalid, StatsError};

/// A percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    /// Median of the resampled estimates.
    pub median: f64,
    /// The resample space had a single element, so every resample is identical.
    pub degenerate: bool,
}

/// Linearly interpolated quantile of sorted data (the usual "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    let frac = h - i as f64;
    match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}

/// Per-resample generator, independent of how resamples are spread over threads.
pub(crate) fn resample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut s = [0u8; 32];
    s[..8].copy_from_slice(&seed.to_le_bytes());
    s[8..16].copy_from_slice(&index.to_le_bytes());
    s[16] = 0xb5;
    ChaCha8Rng::from_seed(s)
}

/// Runs `f(index)` for every index in `0..count` across threads and returns
/// the results in index order.
pub(crate) fn parallel_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count.max(1));
    let chunk = count.div_ceil(threads.max(1)).max(1);
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = (0..count)
            .step_by(chunk)
            .map(|start| s.spawn(move || (start..(start + chunk).min(count)).map(f).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Percentile interval of `estimator` over `resamples` draws, with
/// replacement, of `n` indices into the caller's resample space. The
/// estimator receives the drawn indices.
pub fn bootstrap_ci(
    n: usize,
    estimator: impl Fn(&[usize]) -> f64 + Sync,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<Interval, StatsError> {
    if n == 0 {
        return invalid("resample space is empty");
    }
    if resamples < 100 {
        return invalid(format!("at least 100 resamples are needed, got {resamples}"));
    }
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("level must lie in (0, 1), got {level}"));
    }
    if n == 1 {
        let v = estimator(&[0]);
        return Ok(Interval {
            lo: v,
            hi: v,
            median: v,
            degenerate: true,
        });
    }
    let mut values = parallel_map(resamples, |r| {
        let mut rng = resample_rng(seed, r as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        estimator(&idx)
    });
    if values.iter().any(|v| v.is_nan()) {
        return invalid("estimator returned NaN");
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(Interval {
        lo: quantile(&values, tail),
        hi: quantile(&values, 1.0 - tail),
        median: quantile(&values, 0.5),
        degenerate: false,
    })
}
