//! Brute-force cross-checks: dyadic box counting and covering sums.

use serde::{Deserialize, Serialize};

use crate::dimfn::{cantelli_upper_check, DimensionFunction};
use crate::geometry::{Ball, Interval};
use crate::sequences::{BallSequence, SequenceError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("region is empty")]
    EmptyRegion,
    #[error("scale range is empty")]
    EmptyRange,
    #[error("need at least two scales with nonzero counts for a slope")]
    TooFewScales,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountEstimate {
    pub ks: Vec<u32>,
    /// Cell sizes `2^{-k}`.
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    /// Least-squares slope of `log count` against `log(1/scale)`.
    pub slope: f64,
    pub r2: f64,
}

/// Number of half-open cells `[j h, (j+1) h)`, `h = 2^{-k}`, meeting the
/// union of the open intervals. Intervals need not be sorted or disjoint.
pub fn cells_meeting(intervals: &[Interval], k: u32) -> u64 {
    let mut spans: Vec<(i64, i64)> = intervals.iter().filter(|iv| iv.hi > iv.lo).map(|iv| cell_span(iv, k)).collect();
    spans.sort_unstable();
    let mut count: u64 = 0;
    let mut next_free = i64::MIN;
    for (a, b) in spans {
        let a = a.max(next_free);
        if b >= a {
            count += (b - a + 1) as u64;
            next_free = b + 1;
        }
    }
    count
}

/// First and last cell index meeting the open interval.
fn cell_span(iv: &Interval, k: u32) -> (i64, i64) {
    let scale = 2f64.powi(k as i32);
    let (a, b) = (iv.lo * scale, iv.hi * scale);
    // Cell j meets (lo, hi) iff j < b and j + 1 > a.
    let first = a.floor() as i64;
    let last = b.ceil() as i64 - 1;
    (first, last)
}

fn regress(ks: &[u32], counts: &[u64]) -> Result<(f64, f64), OracleError> {
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&k, &c)| (k as f64 * std::f64::consts::LN_2, (c as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(OracleError::TooFewScales);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, r2))
}

fn estimate(ks: Vec<u32>, counts: Vec<u64>) -> Result<BoxCountEstimate, OracleError> {
    let (slope, r2) = regress(&ks, &counts)?;
    Ok(BoxCountEstimate {
        scales: ks.iter().map(|&k| 2f64.powi(-(k as i32))).collect(),
        ks,
        counts,
        slope,
        r2,
    })
}

/// Box-counting estimate of a finite union of open intervals.
pub fn box_count(intervals: &[Interval], ks: std::ops::RangeInclusive<u32>) -> Result<BoxCountEstimate, OracleError> {
    if intervals.iter().all(|iv| iv.hi <= iv.lo) {
        return Err(OracleError::EmptyRegion);
    }
    let ks: Vec<u32> = ks.collect();
    if ks.is_empty() {
        return Err(OracleError::EmptyRange);
    }
    let counts = ks.iter().map(|&k| cells_meeting(intervals, k)).collect();
    estimate(ks, counts)
}

/// Box counting adapted to a limsup set: at scale `2^{-k}` only the balls
/// whose radius lies in `(2^{-k-1}, 2^{-k}]` are counted. These are the
/// balls of the natural cover at that scale; the full tail union would
/// saturate every cell once the centers are dense.
pub fn shell_box_count(balls: &[Ball], ks: std::ops::RangeInclusive<u32>) -> Result<BoxCountEstimate, OracleError> {
    if balls.is_empty() {
        return Err(OracleError::EmptyRegion);
    }
    let ks: Vec<u32> = ks.collect();
    if ks.is_empty() {
        return Err(OracleError::EmptyRange);
    }
    let mut shells: std::collections::BTreeMap<i64, Vec<Interval>> = Default::default();
    for b in balls {
        // Shell k holds radii in (2^{-k-1}, 2^{-k}].
        let k = (-b.radius.log2()).floor() as i64;
        let k = if 2f64.powi(-(k as i32)) < b.radius { k - 1 } else { k };
        shells.entry(k).or_default().push(b.interval());
    }
    let counts = ks
        .iter()
        .map(|&k| shells.get(&(k as i64)).map_or(0, |ivs| cells_meeting(ivs, k)))
        .collect();
    estimate(ks, counts)
}

/// Rational balls `B(p/q, q^{-τ})` with `q0 ≤ q ≤ q_max`, `0 ≤ p ≤ q`.
pub fn rational_tail_balls(tau: f64, q0: u64, q_max: u64) -> Vec<Ball> {
    let mut out = Vec::new();
    for q in q0.max(1)..=q_max {
        let r = (q as f64).powf(-tau);
        for p in 0..=q {
            out.push(Ball {
                center: p as f64 / q as f64,
                radius: r,
            });
        }
    }
    out
}

/// Shell box-count slope of the rational limsup set over the `k` range
/// covered by radii `q^{-τ}` with `q0 ≤ q ≤ q_max`.
pub fn rational_limsup_slope(tau: f64, q0: u64, q_max: u64) -> Result<BoxCountEstimate, OracleError> {
    let balls = rational_tail_balls(tau, q0, q_max);
    // Shell k holds q in [2^{k/τ}, 2^{(k+1)/τ}); keep the shells that lie
    // entirely inside [q0, q_max].
    let k_lo = (tau * (q0.max(1) as f64).log2()).ceil() as u32;
    let k_hi = ((tau * (q_max as f64).log2()).floor() as u32).saturating_sub(1);
    if k_hi <= k_lo {
        return Err(OracleError::EmptyRange);
    }
    shell_box_count(&balls, k_lo..=k_hi)
}

/// Covering sums `T_N = Σ_{i ≥ N} f(diam B_i)` over the first `n_terms`
/// balls, at `N = 1, 2, 4, …` and `N = n_terms`.
pub fn covering_upper(f: &DimensionFunction, seq: &BallSequence, n_terms: usize) -> Result<Vec<(usize, f64)>, OracleError> {
    Ok(cantelli_upper_check(f, seq, n_terms)?)
}

/// Bounds on the infinite rational tail `Σ_{q > q_from} (q + 1) f(2 q^{-τ})`
/// for a power law `f = κ r^s` with `τ s > 2`: the explicit partial sum up to
/// `q_explicit` and that sum plus the integral bound on the rest.
pub fn rational_tail_bounds(f: &DimensionFunction, tau: f64, q_from: u64, q_explicit: u64) -> (f64, f64) {
    let term = |q: f64| (q + 1.0) * f.eval(2.0 * q.powf(-tau));
    let mut partial = 0.0;
    for q in ((q_from + 1)..=q_explicit).rev() {
        partial += term(q as f64);
    }
    let e = tau * f.s;
    if f.t != 0.0 || e <= 2.0 {
        return (partial, f64::INFINITY);
    }
    // Terms decrease in q, so the sum beyond M is at most the integral
    // from M of κ 2^s (q + 1) q^{-τs}.
    let m = q_explicit as f64;
    let k = f.kappa * 2f64.powf(f.s);
    let rest = k * (m.powf(2.0 - e) / (e - 2.0) + m.powf(1.0 - e) / (e - 1.0));
    (partial, partial + rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::from_ternary_digits;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_interval_has_slope_one() {
        let est = box_count(&[Interval::new(0.0, 1.0)], 1..=12).unwrap();
        assert_eq!(est.counts[0], 2);
        assert_eq!(est.counts[11], 4096);
        assert_abs_diff_eq!(est.slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cantor_cylinders() {
        let m = 12;
        let len = 3f64.powi(-m);
        let cyl: Vec<Interval> = (0..1u32 << m)
            .map(|bits| {
                let digits: Vec<u8> = (0..m).rev().map(|j| if bits >> j & 1 == 1 { 2 } else { 0 }).collect();
                let lo = from_ternary_digits(&digits);
                Interval::new(lo, lo + len)
            })
            .collect();
        let est = box_count(&cyl, 2..=17).unwrap();
        assert!((est.slope - 2f64.ln() / 3f64.ln()).abs() < 0.05, "slope {}", est.slope);
        for w in est.counts.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(box_count(&[], 1..=3), Err(OracleError::EmptyRegion));
        let (lo, hi) = (3, 2);
        assert_eq!(box_count(&[Interval::new(0.0, 1.0)], lo..=hi), Err(OracleError::EmptyRange));
    }

    #[test]
    fn count_is_within_the_combinatorial_bound() {
        let ivs = [Interval::new(0.1, 0.2), Interval::new(0.15, 0.4), Interval::new(0.7, 0.9)];
        let total = 0.3 + 0.2;
        for k in 3..12 {
            let n = cells_meeting(&ivs, k) as f64;
            let h = 2f64.powi(k as i32);
            assert!(n >= total * h - 1e-9 && n <= total * h + 2.0 * ivs.len() as f64, "k {k}");
        }
    }

    #[test]
    fn finite_sequence_has_zero_tail_beyond_its_length() {
        let f = DimensionFunction::power(0.5).unwrap();
        let seq = BallSequence::explicit(vec![Ball::new(0.5, 0.1).unwrap(); 3]);
        let tails = covering_upper(&f, &seq, 3).unwrap();
        let beyond: f64 = tails.iter().filter(|(n, _)| *n > 3).map(|t| t.1).sum();
        assert_eq!(beyond, 0.0);
        assert_abs_diff_eq!(tails[0].1, 3.0 * f.eval(0.2), epsilon = 1e-15);
    }

    #[test]
    fn tail_bounds_bracket_a_long_explicit_sum() {
        let f = DimensionFunction::power(0.9).unwrap();
        let (lo, hi) = rational_tail_bounds(&f, 3.0, 100, 1000);
        let (lo2, _) = rational_tail_bounds(&f, 3.0, 100, 200_000);
        assert!(lo <= lo2 && lo2 <= hi);
        let div = DimensionFunction::power(0.5).unwrap();
        assert_eq!(rational_tail_bounds(&div, 3.0, 100, 1000).1, f64::INFINITY);
    }
}
