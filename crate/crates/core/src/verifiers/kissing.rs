use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::VerifierError;

pub const KISSING_DIMENSION: usize = 11;

/// Sphere centres as integer vectors, `{"vectors": [[...], ...]}`. All vectors
/// share one squared norm `s`; a pair is compatible iff `2 (u . v) <= s`, i.e.
/// the angle between them is at least 60 degrees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KissingConfiguration {
    pub vectors: Vec<Vec<i64>>,
}

fn dot(u: &[i64], v: &[i64]) -> Option<i128> {
    u.iter()
        .zip(v)
        .try_fold(0i128, |acc, (&a, &b)| acc.checked_add((a as i128).checked_mul(b as i128)?))
}

/// Number of spheres in a valid configuration, checked in exact integer arithmetic.
pub fn score_kissing(config: &KissingConfiguration, dimension: usize) -> Result<u64, VerifierError> {
    let vs = &config.vectors;
    if vs.is_empty() {
        return Err(VerifierError::invalid("no vectors"));
    }
    let overflow = || VerifierError::invalid("coordinates too large for exact arithmetic");
    let mut norm = None;
    for (i, v) in vs.iter().enumerate() {
        if v.len() != dimension {
            return Err(VerifierError::invalid(format!(
                "vector {i} has dimension {}, expected {dimension}",
                v.len()
            )));
        }
        let s = dot(v, v).ok_or_else(overflow)?;
        if s == 0 {
            return Err(VerifierError::invalid(format!("zero_vector({i})")));
        }
        match norm {
            None => norm = Some(s),
            Some(n) if n != s => {
                return Err(VerifierError::invalid(format!("unequal_norm({i}): {s} != {n}")));
            }
            _ => {}
        }
    }
    let s = norm.expect("non-empty");

    let mut seen = HashSet::with_capacity(vs.len());
    for (i, v) in vs.iter().enumerate() {
        if !seen.insert(v.as_slice()) {
            return Err(VerifierError::invalid(format!("duplicate_vector({i})")));
        }
    }

    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let d = dot(&vs[i], &vs[j]).ok_or_else(overflow)?;
            if d.checked_mul(2).ok_or_else(overflow)? > s {
                return Err(VerifierError::invalid(format!("angle_below_60({i},{j})")));
            }
        }
    }
    Ok(vs.len() as u64)
}
