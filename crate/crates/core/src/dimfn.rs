//! Dimension functions `f(r) = κ r^s (log 1/r)^t`, the regularity conditions
//! the lower-bound machinery needs, and the `B ↦ B^{f/C}` rescaling.

use serde::{Deserialize, Serialize};

use crate::geometry::Ball;
use crate::sequences::BallSequence;

/// Points on the log grid used by the condition checks.
pub const GRID_POINTS: usize = 10_000;

/// Smallest radius the grid reaches.
pub const GRID_FLOOR: f64 = 1e-300;

/// Largest allowed top of the working range, `1/e`, so that `log(1/r) ≥ 1`.
pub const MAX_RANGE: f64 = 1.0 / std::f64::consts::E;

const LAMBDA_INFLATION: f64 = 1.01;

/// Relative slack tolerated when testing monotonicity on the grid.
const GRID_SLACK: f64 = 1e-12;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DimFnError {
    #[error("invalid dimension function parameters: {0}")]
    BadParams(String),
    #[error("working range top {0} must lie in (0, 1/e]")]
    BadRange(f64),
    #[error("f is not increasing on (0, {r_max}]: f({a}) > f({b})")]
    NotMonotone { r_max: f64, a: f64, b: f64 },
}

/// `f(r) = κ r^s (log 1/r)^t` below `1/e`, continued as `f(1/e) (e r)^s`
/// above it so the function stays continuous and increasing on `[0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionFunction {
    pub kappa: f64,
    pub s: f64,
    pub t: f64,
}

impl DimensionFunction {
    pub fn new(kappa: f64, s: f64, t: f64) -> Result<Self, DimFnError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(DimFnError::BadParams(format!("kappa must be positive, got {kappa}")));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(DimFnError::BadParams(format!("s must be non-negative, got {s}")));
        }
        if !t.is_finite() {
            return Err(DimFnError::BadParams(format!("t must be finite, got {t}")));
        }
        Ok(Self { kappa, s, t })
    }

    /// `f(r) = r^s`.
    pub fn power(s: f64) -> Result<Self, DimFnError> {
        Self::new(1.0, s, 0.0)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if self.t == 0.0 {
            return self.kappa * r.powf(self.s);
        }
        if r <= MAX_RANGE {
            self.kappa * r.powf(self.s) * (-r.ln()).powf(self.t)
        } else {
            // log(e) = 1, so f(1/e) = κ e^-s.
            self.kappa * r.powf(self.s)
        }
    }

    /// `r^{-δ} f(r)`.
    pub fn density_ratio(&self, r: f64, delta: f64) -> f64 {
        self.eval(r) / r.powf(delta)
    }

    /// Radius of `B^{f/C}` for a ball of radius `r`: `(f(r)/C)^{1/δ}`.
    pub fn scaled_radius(&self, r: f64, delta: f64, c: f64) -> f64 {
        (self.eval(r) / c).powf(1.0 / delta)
    }
}

/// Verdict of [`check_dimension_function`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FValidity {
    /// `r ↦ r^{-δ} f(r)` is non-increasing on the working range.
    pub decreasing_ok: bool,
    /// `r^{-δ} f(r) → ∞` as `r → 0`.
    pub divergence_ok: bool,
    /// Doubling constant: `f(2ρ) ≤ λ^δ f(ρ)` on the working range.
    pub lambda: f64,
    pub delta: f64,
    pub r_max: f64,
}

impl FValidity {
    pub fn is_valid(&self) -> bool {
        self.decreasing_ok && self.divergence_ok
    }

    /// Vitali dilation factor `η = 5 λ^δ`.
    pub fn eta(&self) -> f64 {
        5.0 * self.lambda.powf(self.delta)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| {
        if k + 1 == n {
            hi
        } else {
            (a + (b - a) * k as f64 / (n - 1) as f64).exp()
        }
    })
}

/// Tests the two regularity conditions on `(0, r_max]` and computes the
/// doubling constant.
///
/// Each condition must pass both a grid test on [`GRID_POINTS`] log-spaced
/// radii down to [`GRID_FLOOR`] and the analytic test for the parametric
/// family: decrease needs `s < δ`, or `s = δ` with `t ≤ 0`; divergence needs
/// `s < δ`, or `s = δ` with `t > 0`.
pub fn check_dimension_function(f: &DimensionFunction, delta: f64, r_max: f64) -> Result<FValidity, DimFnError> {
    if !(r_max > 0.0 && r_max <= MAX_RANGE * (1.0 + 1e-12)) {
        return Err(DimFnError::BadRange(r_max));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(DimFnError::BadParams(format!("delta must be positive, got {delta}")));
    }
    let grid: Vec<f64> = log_grid(GRID_FLOOR, r_max, GRID_POINTS).collect();

    let mut monotone = true;
    let mut decreasing_grid = true;
    let mut witness = (0.0, 0.0);
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f.eval(a), f.eval(b));
        if fa > fb * (1.0 + GRID_SLACK) && monotone {
            monotone = false;
            witness = (a, b);
        }
        if f.density_ratio(b, delta) > f.density_ratio(a, delta) * (1.0 + GRID_SLACK) {
            decreasing_grid = false;
        }
    }
    if !monotone {
        return Err(DimFnError::NotMonotone {
            r_max,
            a: witness.0,
            b: witness.1,
        });
    }

    let ratio_floor = f.density_ratio(grid[0], delta);
    let ratio_top = f.density_ratio(r_max, delta);
    let divergence_grid = ratio_floor > 1e3 * ratio_top;

    let same_exponent = (f.s - delta).abs() <= 1e-12 * delta.max(1.0);
    let decreasing_analytic = (f.s < delta && !same_exponent) || (same_exponent && f.t >= 0.0);
    let divergence_analytic = (f.s < delta && !same_exponent) || (same_exponent && f.t > 0.0);

    let lambda = grid
        .iter()
        .copied()
        .filter(|&rho| 2.0 * rho <= r_max)
        .chain(std::iter::once(r_max / 2.0))
        .map(|rho| (f.eval(2.0 * rho) / f.eval(rho)).powf(1.0 / delta))
        .fold(1.0_f64, f64::max)
        * LAMBDA_INFLATION;

    Ok(FValidity {
        decreasing_ok: decreasing_grid && decreasing_analytic,
        divergence_ok: divergence_grid && divergence_analytic,
        lambda,
        delta,
        r_max,
    })
}

/// `B(x, (f(r)/C)^{1/δ})`; with `C = 1` this is `B^f`.
pub fn scale_ball(b: &Ball, f: &DimensionFunction, delta: f64, c: f64) -> Ball {
    b.with_radius(f.scaled_radius(b.radius, delta, c))
}

/// Tail sums `T_N = Σ_{i=N}^{n_terms} f(diam B_i)` at `N = 1, 2, 4, …` and at
/// `N = n_terms`.
///
/// These decay toward zero when the series converges, which by the
/// Hausdorff–Cantelli lemma forces `H^f(limsup B_i) = 0`.
pub fn cantelli_upper_check(
    f: &DimensionFunction,
    seq: &BallSequence,
    n_terms: usize,
) -> Result<Vec<(usize, f64)>, crate::sequences::SequenceError> {
    let blocks = seq.radius_blocks(n_terms)?;
    let mut marks: Vec<usize> = std::iter::successors(Some(1usize), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_terms)
        .collect();
    if marks.last() != Some(&n_terms) && n_terms >= 1 {
        marks.push(n_terms);
    }
    // Sum from the far end so small terms accumulate first.
    let mut out = Vec::with_capacity(marks.len());
    let mut acc = 0.0;
    let mut block_iter = blocks.iter().rev().peekable();
    let mut current: Option<(usize, usize, f64)> = None; // (first, last, term)
    for &n in marks.iter().rev() {
        loop {
            if current.is_none() {
                current = block_iter.next().map(|b| (b.first, b.first + b.count - 1, f.eval(2.0 * b.radius)));
            }
            let Some((first, last, term)) = current else {
                break;
            };
            if first >= n {
                acc += term * (last - first + 1) as f64;
                current = None;
                continue;
            }
            if last >= n {
                acc += term * (last - n + 1) as f64;
                current = Some((first, n - 1, term));
            }
            break;
        }
        out.push((n, acc));
    }
    out.reverse();
    Ok(out)
}
