use serde::{Deserialize, Serialize};

use super::VerifierError;

/// Vertices of the unit-area container used for the Heilbronn problem.
pub const HEILBRONN_TRIANGLE: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];

/// Payload `{"points": [[x, y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet2D {
    pub points: Vec<[f64; 2]>,
}

impl PointSet2D {
    pub fn new(points: impl IntoIterator<Item = [f64; 2]>) -> Self {
        Self {
            points: points.into_iter().collect(),
        }
    }

    fn check_finite(&self) -> Result<(), VerifierError> {
        match self.points.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
            Some(i) => Err(VerifierError::invalid(format!("non_finite({i})"))),
            None => Ok(()),
        }
    }

    fn check_count(&self, min: usize, expected: Option<usize>) -> Result<(), VerifierError> {
        let n = self.points.len();
        if let Some(e) = expected {
            if n != e {
                return Err(VerifierError::invalid(format!("expected {e} points, found {n}")));
            }
        }
        if n < min {
            return Err(VerifierError::invalid(format!("need at least {min} points, found {n}")));
        }
        Ok(())
    }
}

/// Ratio of the largest to the smallest pairwise Euclidean distance (minimize).
pub fn score_max_min_ratio(points: &PointSet2D, expected: Option<usize>) -> Result<f64, VerifierError> {
    points.check_count(2, expected)?;
    points.check_finite()?;
    let pts = &points.points;
    let mut min_d = f64::INFINITY;
    let mut max_d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
            if d == 0.0 {
                return Err(VerifierError::invalid(format!("duplicate_points({i},{j})")));
            }
            min_d = min_d.min(d);
            max_d = max_d.max(d);
        }
    }
    Ok(max_d / min_d)
}

/// Inside or on the container: all barycentric coordinates non-negative, no tolerance.
fn in_triangle(p: [f64; 2]) -> bool {
    let [x, y] = p;
    // barycentric weights of (1,0) and (0,2) are x and y/2
    let wb = x;
    let wc = y / 2.0;
    let wa = 1.0 - wb - wc;
    wa >= 0.0 && wb >= 0.0 && wc >= 0.0
}

/// Vertices are put in lexicographic order first so the rounded value does
/// not depend on the order the points were listed in.
fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    let [a, b, c] = v;
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// Smallest area among all point triples (maximize); every point must lie in
/// [`HEILBRONN_TRIANGLE`].
pub fn score_heilbronn(points: &PointSet2D, expected: Option<usize>) -> Result<f64, VerifierError> {
    points.check_count(3, expected)?;
    points.check_finite()?;
    let pts = &points.points;
    if let Some(i) = pts.iter().position(|&p| !in_triangle(p)) {
        return Err(VerifierError::invalid(format!("outside_triangle({i})")));
    }
    let n = pts.len();
    let mut min_area = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                min_area = min_area.min(triangle_area(pts[i], pts[j], pts[k]));
            }
        }
    }
    Ok(min_area)
}
