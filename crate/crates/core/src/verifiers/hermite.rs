//! Uncertainty-inequality scoring for functions
//! `f(x) = sum_n a_n B_{4n}(sqrt(2 pi) x) exp(-pi x^2)`.
//!
//! Each term is an eigenfunction of the Fourier transform with eigenvalue 1,
//! so `f` equals its own transform and the objective `A(f) A(f^)` is
//! `A(f)^2 = r^2 / (2 pi)`, where `r` is the last sign change of the even
//! polynomial `p(t) = sum_n a_n B_{4n}(t)`.
//!
//! Roots are isolated without sampling: the roots of `p^(j+1)` split
//! `[0, R]` into pieces on which `p^(j)` is monotone, so each piece holds at
//! most one root of `p^(j)`, found by bisection. Starting from the constant
//! top derivative this recovers every real root of `p` on `[0, R]`. All
//! polynomials are evaluated through the three-term recurrence of the basis
//! rather than in monomial form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::VerifierError;

/// Relative size of `p(0)` below which a candidate is projected back onto `p(0) = 0`.
pub const REPAIR_TOLERANCE: f64 = 1e-6;
/// Absolute bisection tolerance in `t`.
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HermiteBasis {
    /// `H_n`, leading coefficient `2^n`.
    Physicist,
    /// `H_n / 2^n`, leading coefficient 1.
    Probabilist,
}

impl std::str::FromStr for HermiteBasis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "physicist" => Ok(HermiteBasis::Physicist),
            "probabilist" => Ok(HermiteBasis::Probabilist),
            other => Err(format!("unknown Hermite basis `{other}`")),
        }
    }
}

/// Factor `c` with `physicist coefficient * c = probabilist coefficient` for `B_{4n}`.
pub fn basis_conversion_factor(n: usize) -> f64 {
    2f64.powi(4 * n as i32)
}

/// Payload `{"coefficients": [...], "basis": "physicist" | "probabilist"}`.
/// `coefficients[n]` multiplies `B_{4n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteCandidate {
    pub coefficients: Vec<f64>,
    pub basis: HermiteBasis,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HermiteError {
    #[error("no coefficients")]
    Empty,
    #[error("coefficient {0} is not finite")]
    NonFinite(usize),
    #[error("all coefficients are zero")]
    ZeroFunction,
    #[error("p(0) = {value:e} violates the root constraint (relative size {relative:e})")]
    ConstraintViolated { value: f64, relative: f64 },
    #[error("p(t) is negative for arbitrarily large |t|")]
    NegativeTail,
    #[error("p(t) never changes sign")]
    NoSignChange,
}

impl From<HermiteError> for VerifierError {
    fn from(e: HermiteError) -> Self {
        VerifierError::Invalid(e.to_string())
    }
}

/// `B_0(t) .. B_m(t)` by the three-term recurrence.
fn basis_values(basis: HermiteBasis, m: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if m == 0 {
        return;
    }
    match basis {
        HermiteBasis::Physicist => {
            out.push(2.0 * t);
            for n in 1..m {
                let next = 2.0 * t * out[n] - 2.0 * n as f64 * out[n - 1];
                out.push(next);
            }
        }
        HermiteBasis::Probabilist => {
            out.push(t);
            for n in 1..m {
                let next = t * out[n] - 0.5 * n as f64 * out[n - 1];
                out.push(next);
            }
        }
    }
}

/// Value of `sum_m coef[m] B_m(t)`.
pub fn evaluate_series(basis: HermiteBasis, coef: &[f64], t: f64) -> f64 {
    let mut vals = Vec::with_capacity(coef.len());
    basis_values(basis, coef.len().saturating_sub(1), t, &mut vals);
    coef.iter().zip(&vals).map(|(c, v)| c * v).sum()
}

/// `p` and all its derivatives as Hermite series. `levels[j][m]` is the
/// coefficient of `B_m` in `p^(j)`; uses `B_m' = m B_{m-1}` (times 2 for physicist).
struct DerivativeTower {
    basis: HermiteBasis,
    levels: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl DerivativeTower {
    fn new(basis: HermiteBasis, series: Vec<f64>) -> Self {
        let d = series.len() - 1;
        let scale = match basis {
            HermiteBasis::Physicist => 2.0,
            HermiteBasis::Probabilist => 1.0,
        };
        let mut levels = Vec::with_capacity(d + 1);
        levels.push(series);
        for j in 1..=d {
            let prev = &levels[j - 1];
            let next: Vec<f64> = (0..prev.len() - 1).map(|m| prev[m + 1] * scale * (m + 1) as f64).collect();
            levels.push(next);
        }
        Self {
            basis,
            levels,
            scratch: Vec::with_capacity(d + 1),
        }
    }

    fn degree(&self) -> usize {
        self.levels.len() - 1
    }

    fn eval(&mut self, level: usize, t: f64) -> f64 {
        let coef = &self.levels[level];
        basis_values(self.basis, coef.len() - 1, t, &mut self.scratch);
        coef.iter().zip(&self.scratch).map(|(c, v)| c * v).sum()
    }

    /// `p^(level)(t)` and `p^(level+1)(t)` from one pass of the recurrence.
    fn eval_with_slope(&mut self, level: usize, t: f64) -> (f64, f64) {
        let [coef, next] = [&self.levels[level], &self.levels[level + 1]];
        basis_values(self.basis, coef.len() - 1, t, &mut self.scratch);
        let value = coef.iter().zip(&self.scratch).map(|(c, v)| c * v).sum();
        let slope = next.iter().zip(&self.scratch).map(|(c, v)| c * v).sum();
        (value, slope)
    }

    /// Sorted roots of `p^(level)` in `[lo, hi]`, given the sorted roots of `p^(level+1)`.
    fn roots_between(&mut self, level: usize, lo: f64, hi: f64, critical: &[f64]) -> Vec<f64> {
        let mut points = Vec::with_capacity(critical.len() + 2);
        points.push(lo);
        points.extend(critical.iter().copied().filter(|&c| c > lo && c < hi));
        points.push(hi);
        let mut roots: Vec<f64> = Vec::new();
        let push = |r: f64, roots: &mut Vec<f64>| {
            if roots.last().is_none_or(|&l| r > l) {
                roots.push(r);
            }
        };
        let mut fa = self.eval(level, points[0]);
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fb = self.eval(level, b);
            if fa == 0.0 {
                push(a, &mut roots);
            } else if fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
                push(self.bisect(level, a, b, fa), &mut roots);
            }
            fa = fb;
        }
        if fa == 0.0 {
            push(hi, &mut roots);
        }
        roots
    }

    /// Root of `p^(level)` in the sign-changing bracket `[a, b]`, to within
    /// [`BISECTION_TOL`]. Newton steps on the next level's derivative are
    /// taken while they land inside the bracket; otherwise, or after too
    /// many steps, the bracket is bisected.
    fn bisect(&mut self, level: usize, mut a: f64, mut b: f64, fa: f64) -> f64 {
        const NEWTON_STEPS: usize = 60;
        let neg_at_a = fa < 0.0;
        let mut x = 0.5 * (a + b);
        let mut steps = 0;
        while b - a > BISECTION_TOL {
            let (fx, slope) = self.eval_with_slope(level, x);
            if fx == 0.0 {
                return x;
            }
            if (fx < 0.0) == neg_at_a {
                a = x;
            } else {
                b = x;
            }
            steps += 1;
            let mut next = x - fx / slope;
            let inside = next > a && next < b;
            if inside && steps < NEWTON_STEPS && (next - x).abs() < 0.5 * BISECTION_TOL {
                // step just past the estimate so the bracket closes
                next = (x + (0.5 * BISECTION_TOL).copysign(next - x)).clamp(a, b);
            } else if !inside || steps >= NEWTON_STEPS {
                next = 0.5 * (a + b);
            }
            if next <= a || next >= b {
                break;
            }
            x = next;
        }
        0.5 * (a + b)
    }

    /// Roots of `p` and of `p'` on `[0, hi]`.
    fn isolate(&mut self, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.degree();
        let mut critical: Vec<f64> = Vec::new();
        let mut roots = Vec::new();
        for level in (0..d).rev() {
            let found = self.roots_between(level, 0.0, hi, &critical);
            if level == 0 {
                roots = found;
            } else {
                critical = found;
            }
        }
        (roots, critical)
    }
}

/// Full scoring detail for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyDetails {
    /// The candidate after projection onto `p(0) = 0`.
    pub repaired: HermiteCandidate,
    /// Last sign change of `p`, in the scaled variable `t`.
    pub r_max: f64,
    /// `A(f) = r_max / sqrt(2 pi)`.
    pub a_f: f64,
    /// The bound `A(f) A(f^) = A(f)^2`.
    pub score: f64,
}

/// `B_{4n}(0)` for each coefficient index `n < count`.
pub fn values_at_zero(basis: HermiteBasis, count: usize) -> Vec<f64> {
    let mut vals = Vec::new();
    basis_values(basis, 4 * (count - 1), 0.0, &mut vals);
    (0..count).map(|n| vals[4 * n]).collect()
}

impl HermiteCandidate {
    pub fn new(coefficients: Vec<f64>, basis: HermiteBasis) -> Self {
        Self { coefficients, basis }
    }

    /// `p(0)`.
    pub fn value_at_zero(&self) -> f64 {
        let c0 = values_at_zero(self.basis, self.coefficients.len().max(1));
        self.coefficients.iter().zip(&c0).map(|(a, c)| a * c).sum()
    }

    /// Projects onto the hyperplane `p(0) = 0` when `|p(0)|` is within
    /// [`REPAIR_TOLERANCE`] of the largest term `|a_n B_{4n}(0)|`; rejects otherwise.
    /// Only coefficients up to the last nonzero one move.
    pub fn repaired(&self) -> Result<HermiteCandidate, HermiteError> {
        if self.coefficients.is_empty() {
            return Err(HermiteError::Empty);
        }
        if let Some(i) = self.coefficients.iter().position(|a| !a.is_finite()) {
            return Err(HermiteError::NonFinite(i));
        }
        let c0 = values_at_zero(self.basis, self.coefficients.len());
        let scale = self
            .coefficients
            .iter()
            .zip(&c0)
            .map(|(a, c)| (a * c).abs())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(HermiteError::ZeroFunction);
        }
        let value: f64 = self.coefficients.iter().zip(&c0).map(|(a, c)| a * c).sum();
        let relative = value.abs() / scale;
        if relative > REPAIR_TOLERANCE {
            return Err(HermiteError::ConstraintViolated { value, relative });
        }
        // trailing zeros stay zero so the degree is unchanged
        let last = self.coefficients.iter().rposition(|&a| a != 0.0).unwrap_or(0);
        let norm2: f64 = c0[..=last].iter().map(|c| c * c).sum();
        let coefficients = self
            .coefficients
            .iter()
            .zip(&c0)
            .enumerate()
            .map(|(n, (a, c))| if n <= last { a - value * c / norm2 } else { *a })
            .collect();
        Ok(HermiteCandidate {
            coefficients,
            basis: self.basis,
        })
    }

    /// The same function written in the other basis.
    pub fn to_basis(&self, basis: HermiteBasis) -> HermiteCandidate {
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(n, &a)| match (self.basis, basis) {
                (HermiteBasis::Physicist, HermiteBasis::Probabilist) => a * basis_conversion_factor(n),
                (HermiteBasis::Probabilist, HermiteBasis::Physicist) => a / basis_conversion_factor(n),
                _ => a,
            })
            .collect();
        HermiteCandidate { coefficients, basis }
    }

    /// Series coefficients of `p` over `B_0 .. B_{4k}`, trimmed to the last
    /// nonzero term.
    fn series(&self) -> Vec<f64> {
        let last = self.coefficients.iter().rposition(|&a| a != 0.0).unwrap_or(0);
        let mut series = vec![0.0; 4 * last + 1];
        for (n, &a) in self.coefficients[..=last].iter().enumerate() {
            series[4 * n] = a;
        }
        series
    }
}

/// Monomial coefficients of `sum_m coef[m] B_m`, lowest degree first.
fn to_monomial(basis: HermiteBasis, coef: &[f64]) -> Vec<f64> {
    let d = coef.len() - 1;
    let mut out = vec![0.0; d + 1];
    let mut prev = vec![0.0; d + 1];
    let mut cur = vec![0.0; d + 1];
    cur[0] = 1.0;
    out[0] += coef[0];
    let (lead, rec) = match basis {
        HermiteBasis::Physicist => (2.0, 2.0),
        HermiteBasis::Probabilist => (1.0, 0.5),
    };
    for m in 0..d {
        // B_{m+1} = lead * t * B_m - rec * m * B_{m-1}
        let mut next = vec![0.0; d + 1];
        for i in 0..=m {
            next[i + 1] += lead * cur[i];
        }
        if m > 0 {
            for i in 0..d {
                next[i] -= rec * m as f64 * prev[i];
            }
        }
        for i in 0..=d {
            out[i] += coef[m + 1] * next[i];
        }
        prev = std::mem::replace(&mut cur, next);
    }
    out
}

/// Fujiwara bound: every root satisfies
/// `|t| <= 2 max_i |c_{d-i} / c_d|^(1/i)`, with the constant term halved.
fn root_bound(basis: HermiteBasis, series: &[f64]) -> f64 {
    let mono = to_monomial(basis, series);
    let d = mono.len() - 1;
    let lead = mono[d];
    let bound = (1..=d)
        .map(|i| {
            let c = if i == d { mono[0] / 2.0 } else { mono[d - i] };
            (c / lead).abs().powf(1.0 / i as f64)
        })
        .fold(0.0, f64::max);
    // a margin keeps the outermost root strictly inside
    2.0 * bound * (1.0 + 1e-9) + 1e-9
}

pub fn uncertainty_details(candidate: &HermiteCandidate) -> Result<UncertaintyDetails, HermiteError> {
    let repaired = candidate.repaired()?;
    let series = repaired.series();
    let lead = *series.last().expect("non-empty");
    if series.len() == 1 {
        // a constant satisfying p(0) = 0 is the zero function
        return Err(HermiteError::ZeroFunction);
    }
    if lead < 0.0 {
        return Err(HermiteError::NegativeTail);
    }
    let bound = root_bound(repaired.basis, &series);
    let mut tower = DerivativeTower::new(repaired.basis, series);
    let (roots, critical) = tower.isolate(bound);

    // p has constant sign between consecutive breakpoints
    let mut breaks: Vec<f64> = Vec::with_capacity(roots.len() + critical.len() + 2);
    breaks.push(0.0);
    breaks.extend(roots);
    breaks.extend(critical);
    breaks.push(bound);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut r_max = 0.0;
    for w in breaks.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if mid > w[0] && mid < w[1] && tower.eval(0, mid) < 0.0 {
            r_max = w[1];
        }
    }
    if r_max >= bound {
        return Err(HermiteError::NegativeTail);
    }
    if r_max == 0.0 {
        return Err(HermiteError::NoSignChange);
    }
    let a_f = r_max / (2.0 * PI).sqrt();
    Ok(UncertaintyDetails {
        repaired,
        r_max,
        a_f,
        score: r_max * r_max / (2.0 * PI),
    })
}

/// The bound `C = A(f)^2` (minimize).
pub fn score_uncertainty(candidate: &HermiteCandidate) -> Result<f64, HermiteError> {
    uncertainty_details(candidate).map(|d| d.score)
}
