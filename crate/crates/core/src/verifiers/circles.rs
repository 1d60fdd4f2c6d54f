use std::fmt;

use serde::{Deserialize, Serialize};

use super::VerifierError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl From<[f64; 3]> for Circle {
    fn from([x, y, r]: [f64; 3]) -> Self {
        Circle { x, y, r }
    }
}

impl From<Circle> for [f64; 3] {
    fn from(c: Circle) -> Self {
        [c.x, c.y, c.r]
    }
}

/// Payload `{"circles": [[x, y, r], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclePacking {
    pub circles: Vec<Circle>,
}

impl CirclePacking {
    pub fn new(circles: impl IntoIterator<Item = [f64; 3]>) -> Self {
        Self {
            circles: circles.into_iter().map(Circle::from).collect(),
        }
    }

    pub fn sum_radii(&self) -> f64 {
        self.circles.iter().map(|c| c.r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleViolation {
    Empty,
    NonFinite(usize),
    NonPositiveRadius(usize),
    Overlap(usize, usize),
    OutsideSquare(usize),
    Count { expected: usize, found: usize },
}

impl fmt::Display for CircleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircleViolation::Empty => write!(f, "empty packing"),
            CircleViolation::NonFinite(i) => write!(f, "non_finite({i})"),
            CircleViolation::NonPositiveRadius(i) => write!(f, "non_positive_radius({i})"),
            CircleViolation::Overlap(i, j) => write!(f, "overlap({i},{j})"),
            CircleViolation::OutsideSquare(i) => write!(f, "outside_square({i})"),
            CircleViolation::Count { expected, found } => {
                write!(f, "expected {expected} circles, found {found}")
            }
        }
    }
}

fn overlaps(a: &Circle, b: &Circle) -> bool {
    let center_distance = ((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)).sqrt();
    center_distance < a.r + b.r
}

fn outside(c: &Circle) -> bool {
    c.x - c.r < 0.0 || c.y - c.r < 0.0 || c.x + c.r > 1.0 || c.y + c.r > 1.0
}

/// Disjointness and containment in the unit square. Tangent circles and
/// circles touching the boundary pass. Pairs are pruned with a sweep over the
/// x-extent of each circle, so only pairs whose extents overlap are compared.
pub fn check_circles(packing: &CirclePacking) -> Result<(), CircleViolation> {
    let circles = &packing.circles;
    if circles.is_empty() {
        return Err(CircleViolation::Empty);
    }
    if let Some(i) = circles
        .iter()
        .position(|c| !(c.x.is_finite() && c.y.is_finite() && c.r.is_finite()))
    {
        return Err(CircleViolation::NonFinite(i));
    }

    let mut order: Vec<usize> = (0..circles.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&circles[a], &circles[b]);
        (ca.x - ca.r).total_cmp(&(cb.x - cb.r))
    });
    let mut first: Option<(usize, usize)> = None;
    for (pos, &i) in order.iter().enumerate() {
        let ci = &circles[i];
        let right = ci.x + ci.r.abs();
        for &j in &order[pos + 1..] {
            let cj = &circles[j];
            let left = cj.x - cj.r;
            // slack keeps rounding in the extent test from hiding a pair the
            // exact distance test would flag
            if left - right > 1e-12 * (1.0 + left.abs() + right.abs()) {
                break;
            }
            if overlaps(ci, cj) {
                let pair = (i.min(j), i.max(j));
                if first.is_none_or(|f| pair < f) {
                    first = Some(pair);
                }
            }
        }
    }
    if let Some((i, j)) = first {
        return Err(CircleViolation::Overlap(i, j));
    }
    if let Some(i) = circles.iter().position(outside) {
        return Err(CircleViolation::OutsideSquare(i));
    }
    Ok(())
}

/// True iff the circles are pairwise disjoint and inside the unit square.
pub fn verify_circles(packing: &CirclePacking) -> bool {
    check_circles(packing).is_ok()
}

/// Sum of radii of a valid packing with strictly positive radii, optionally
/// requiring an exact circle count.
pub fn score_circles(packing: &CirclePacking, expected: Option<usize>) -> Result<f64, VerifierError> {
    let fail = |v: CircleViolation| VerifierError::Invalid(v.to_string());
    if let Some(n) = expected {
        if packing.circles.len() != n {
            return Err(fail(CircleViolation::Count {
                expected: n,
                found: packing.circles.len(),
            }));
        }
    }
    check_circles(packing).map_err(fail)?;
    if let Some(i) = packing.circles.iter().position(|c| c.r <= 0.0) {
        return Err(fail(CircleViolation::NonPositiveRadius(i)));
    }
    Ok(packing.sum_radii())
}
