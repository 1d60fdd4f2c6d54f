use super::{invalid, StatsError};

/// Probability that a uniformly drawn `k`-subset of `n` samples contains at
/// least one of the `c` qualifying ones: `1 - C(n-c, k) / C(n, k)`, computed
/// as a running product so large `n` cannot overflow.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, StatsError> {
    if c > n {
        return invalid(format!("c = {c} exceeds n = {n}"));
    }
    if k == 0 || k > n {
        return invalid(format!("k = {k} must lie in 1..={n}"));
    }
    if c == 0 {
        return Ok(0.0);
    }
    if n - c < k {
        return Ok(1.0);
    }
    // C(n-c, k) / C(n, k) = prod_{i<k} (n-c-i) / (n-i)
    let miss: f64 = (0..k).map(|i| (n - c - i) as f64 / (n - i) as f64).product();
    Ok(1.0 - miss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(pass_at_k(2000, 0, 100).unwrap(), 0.0);
        assert_eq!(pass_at_k(4, 1, 4).unwrap(), 1.0);
        assert!((pass_at_k(4, 1, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
        assert!(pass_at_k(3, 1, 4).is_err());
    }

    #[test]
    fn large_n_is_finite() {
        let p = pass_at_k(1_000_000, 10, 100_000).unwrap();
        let direct = 1.0 - 0.9f64.powi(10);
        assert!((p - direct).abs() < 1e-4, "{p}");
    }
}
