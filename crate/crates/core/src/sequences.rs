//! Ball sequences `(B_i)` with radii tending to zero.
//!
//! Indices are 1-based throughout, matching the usual `i ∈ ℕ` enumeration.

use serde::{Deserialize, Serialize};

use crate::geometry::{AhlforsSpace, Ball, Interval};
use crate::rng::stream_rng;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("approximation exponent tau must exceed 1, got {0}")]
    BadTau(f64),
    #[error("b-adic base must be at least 2, got {0}")]
    BadBase(u64),
    #[error("random radius exponent must be positive, got {0}")]
    BadRate(f64),
    #[error("ball count must be at least 1")]
    Empty,
    #[error("no ball with index >= {n} meets the target ball")]
    EmptyRestriction { n: usize },
    #[error("explicit sequence has {have} balls, {want} requested")]
    TooShort { have: usize, want: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// A deterministic recipe for `(B_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BallSequence {
    /// `B(p/q, q^{-τ})` for `q = 1, 2, …` and `0 ≤ p ≤ q`, by increasing `q`
    /// then `p`. Fractions are not reduced.
    RationalApprox {
        tau: f64,
    },
    /// `B(p/b^k, b^{-kτ})` for `k = 1, 2, …` and `0 ≤ p ≤ b^k`.
    Badic {
        base: u64,
        tau: f64,
    },
    /// Centers drawn from the space's natural measure; the `i`-th radius is
    /// `(1/i)^{rate/δ} / 2`.
    Random {
        seed: u64,
        rate: f64,
    },
    Explicit {
        balls: Vec<Ball>,
    },
}

/// A ball together with its 1-based position in the sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedBall {
    pub index: usize,
    pub ball: Ball,
}

/// A run of consecutive indices sharing one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusBlock {
    pub first: usize,
    pub count: usize,
    pub radius: f64,
}

impl BallSequence {
    pub fn rational(tau: f64) -> Result<Self, SequenceError> {
        let s = Self::RationalApprox { tau };
        s.validate()?;
        Ok(s)
    }

    pub fn badic(base: u64, tau: f64) -> Result<Self, SequenceError> {
        let s = Self::Badic { base, tau };
        s.validate()?;
        Ok(s)
    }

    pub fn random(seed: u64, rate: f64) -> Result<Self, SequenceError> {
        let s = Self::Random { seed, rate };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(balls: Vec<Ball>) -> Self {
        Self::Explicit { balls }
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        match *self {
            Self::RationalApprox { tau } if !(tau > 1.0 && tau.is_finite()) => Err(SequenceError::BadTau(tau)),
            Self::Badic { tau, .. } if !(tau > 1.0 && tau.is_finite()) => Err(SequenceError::BadTau(tau)),
            Self::Badic { base, .. } if base < 2 => Err(SequenceError::BadBase(base)),
            Self::Random { rate, .. } if !(rate > 0.0 && rate.is_finite()) => Err(SequenceError::BadRate(rate)),
            _ => Ok(()),
        }
    }

    /// Number of rational balls with denominator at most `q_max`:
    /// `Σ_{q ≤ Q} (q + 1) = Q (Q + 3) / 2`.
    pub fn rational_count(q_max: usize) -> usize {
        q_max * (q_max + 3) / 2
    }

    /// Number of b-adic balls with level at most `k_max`.
    pub fn badic_count(base: u64, k_max: u32) -> usize {
        (1..=k_max).map(|k| base.pow(k) as usize + 1).sum()
    }

    /// Materializes `B_1, …, B_{i_max}`.
    pub fn generate(&self, space: &AhlforsSpace, i_max: usize) -> Result<Vec<Ball>, SequenceError> {
        self.validate()?;
        if i_max == 0 {
            return Err(SequenceError::Empty);
        }
        let mut out = Vec::with_capacity(i_max);
        match self {
            Self::RationalApprox { tau } => {
                'outer: for q in 1u64.. {
                    let r = (q as f64).powf(-tau);
                    for p in 0..=q {
                        if out.len() == i_max {
                            break 'outer;
                        }
                        out.push(Ball::new(p as f64 / q as f64, r)?);
                    }
                }
            }
            Self::Badic { base, tau } => {
                'outer: for k in 1u32.. {
                    let denom = (*base as f64).powi(k as i32);
                    let r = denom.powf(-tau);
                    for p in 0..=base.pow(k) {
                        if out.len() == i_max {
                            break 'outer;
                        }
                        out.push(Ball::new(p as f64 / denom, r)?);
                    }
                }
            }
            Self::Random { seed, rate } => {
                let mut rng = stream_rng(*seed, 0);
                let delta = space.delta();
                for i in 1..=i_max {
                    let center = space.sample(&mut rng);
                    let r = (1.0 / i as f64).powf(rate / delta) / 2.0;
                    out.push(Ball::new(center, r)?);
                }
            }
            Self::Explicit { balls } => {
                if balls.len() < i_max {
                    return Err(SequenceError::TooShort {
                        have: balls.len(),
                        want: i_max,
                    });
                }
                out.extend_from_slice(&balls[..i_max]);
            }
        }
        Ok(out)
    }

    /// Radii of the first `n_terms` balls grouped into equal-radius runs,
    /// without materializing centers.
    pub fn radius_blocks(&self, n_terms: usize) -> Result<Vec<RadiusBlock>, SequenceError> {
        self.validate()?;
        let mut out = Vec::new();
        let mut first = 1usize;
        let mut push = |count: usize, radius: f64, out: &mut Vec<RadiusBlock>| {
            let left = n_terms + 1 - first;
            let count = count.min(left);
            if count > 0 {
                out.push(RadiusBlock { first, count, radius });
                first += count;
            }
            first > n_terms
        };
        match self {
            Self::RationalApprox { tau } => {
                for q in 1usize.. {
                    if push(q + 1, (q as f64).powf(-tau), &mut out) {
                        break;
                    }
                }
            }
            Self::Badic { base, tau } => {
                for k in 1u32.. {
                    let denom = (*base as f64).powi(k as i32);
                    if push(base.pow(k) as usize + 1, denom.powf(-tau), &mut out) {
                        break;
                    }
                }
            }
            Self::Random { .. } | Self::Explicit { .. } => {
                let balls = self.generate(&AhlforsSpace::UnitInterval, n_terms)?;
                for b in balls {
                    if push(1, b.radius, &mut out) {
                        break;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Attaches 1-based indices.
pub fn indexed(balls: &[Ball]) -> Vec<IndexedBall> {
    balls
        .iter()
        .enumerate()
        .map(|(k, &ball)| IndexedBall { index: k + 1, ball })
        .collect()
}

/// `{B_i : i ≥ N, B_i ∩ B₀ ≠ ∅}`, balls returned whole.
pub fn restrict_to(balls: &[Ball], n: usize, b0: &Ball) -> Result<Vec<IndexedBall>, SequenceError> {
    let out: Vec<IndexedBall> = indexed(balls)
        .into_iter()
        .filter(|ib| ib.index >= n && ib.ball.intersects(b0))
        .collect();
    if out.is_empty() {
        Err(SequenceError::EmptyRestriction { n })
    } else {
        Ok(out)
    }
}

/// Range index over a materialized sequence: balls bucketed by dyadic radius
/// class, each bucket sorted by center.
#[derive(Clone, Debug)]
pub struct BallIndex {
    by_center: Vec<IndexedBall>,
    buckets: Vec<Bucket>,
}

#[derive(Clone, Debug)]
struct Bucket {
    max_radius: f64,
    balls: Vec<IndexedBall>,
}

impl BallIndex {
    pub fn new(balls: &[IndexedBall]) -> Self {
        let mut by_center = balls.to_vec();
        by_center.sort_by(|a, b| a.ball.center.total_cmp(&b.ball.center).then(a.index.cmp(&b.index)));
        let mut groups: std::collections::BTreeMap<i32, Vec<IndexedBall>> = Default::default();
        for ib in balls {
            let class = ib.ball.radius.log2().floor() as i32;
            groups.entry(class).or_default().push(*ib);
        }
        let buckets = groups
            .into_values()
            .map(|mut v| {
                v.sort_by(|a, b| a.ball.center.total_cmp(&b.ball.center));
                let max_radius = v.iter().map(|b| b.ball.radius).fold(0.0, f64::max);
                Bucket { max_radius, balls: v }
            })
            .collect();
        Self { by_center, buckets }
    }

    pub fn len(&self) -> usize {
        self.by_center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_center.is_empty()
    }

    /// Balls whose center lies in the closed window, in center order.
    pub fn centers_in(&self, window: Interval) -> &[IndexedBall] {
        let a = self.by_center.partition_point(|b| b.ball.center < window.lo);
        let z = self.by_center.partition_point(|b| b.ball.center <= window.hi);
        &self.by_center[a..z.max(a)]
    }

    /// Balls with index `≥ n` that meet the open ball `target`.
    pub fn intersecting(&self, target: &Ball, n: usize) -> Vec<IndexedBall> {
        let mut out: Vec<IndexedBall> = Vec::new();
        for bucket in &self.buckets {
            let lo = target.lo() - bucket.max_radius;
            let hi = target.hi() + bucket.max_radius;
            let a = bucket.balls.partition_point(|b| b.ball.center <= lo);
            let z = bucket.balls.partition_point(|b| b.ball.center < hi);
            out.extend(
                bucket.balls[a..z.max(a)]
                    .iter()
                    .filter(|b| b.index >= n && b.ball.intersects(target)),
            );
        }
        out.sort_by_key(|b| b.index);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimfn::{scale_ball, DimensionFunction};
    use crate::geometry::RegionUnion;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rational_enumeration_order() {
        let seq = BallSequence::rational(2.0).unwrap();
        let balls = seq.generate(&AhlforsSpace::UnitInterval, BallSequence::rational_count(2)).unwrap();
        let want = [(0.0, 1.0), (1.0, 1.0), (0.0, 0.25), (0.5, 0.25), (1.0, 0.25)];
        assert_eq!(balls.len(), want.len());
        for (b, (c, r)) in balls.iter().zip(want) {
            assert_abs_diff_eq!(b.center, c);
            assert_abs_diff_eq!(b.radius, r);
        }
    }

    #[test]
    fn explicit_and_random() {
        let one = Ball::new(0.5, 0.1).unwrap();
        let seq = BallSequence::explicit(vec![one]);
        assert_eq!(seq.generate(&AhlforsSpace::UnitInterval, 1).unwrap(), vec![one]);
        assert!(matches!(
            seq.generate(&AhlforsSpace::UnitInterval, 2),
            Err(SequenceError::TooShort { .. })
        ));

        let seq = BallSequence::random(7, 1.0).unwrap();
        let balls = seq.generate(&AhlforsSpace::UnitInterval, 100).unwrap();
        assert_abs_diff_eq!(balls[99].radius, 0.005, epsilon = 1e-15);
        assert_eq!(balls, seq.generate(&AhlforsSpace::UnitInterval, 100).unwrap());
    }

    #[test]
    fn small_tau_is_rejected() {
        assert_eq!(BallSequence::rational(1.0), Err(SequenceError::BadTau(1.0)));
        assert!(BallSequence::badic(1, 2.0).is_err());
        assert!(BallSequence::rational(3.0)
            .unwrap()
            .generate(&AhlforsSpace::UnitInterval, 0)
            .is_err());
    }

    #[test]
    fn badic_centers() {
        let seq = BallSequence::badic(3, 2.0).unwrap();
        let balls = seq.generate(&AhlforsSpace::UnitInterval, BallSequence::badic_count(3, 2)).unwrap();
        assert_eq!(balls.len(), 4 + 10);
        assert_abs_diff_eq!(balls[5].center, 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(balls[5].radius, 1.0 / 81.0, epsilon = 1e-15);
    }

    #[test]
    fn restriction_examples() {
        let seq = BallSequence::rational(3.0).unwrap();
        let balls = seq
            .generate(&AhlforsSpace::UnitInterval, BallSequence::rational_count(100))
            .unwrap();
        let ambient = Ball::new(0.5, 0.5).unwrap();
        let all = restrict_to(&balls, 1, &ambient).unwrap();
        assert_eq!(all.len(), balls.len());

        let left = [Ball::new(-1.0, 0.1).unwrap(), Ball::new(-0.5, 0.2).unwrap()];
        assert_eq!(
            restrict_to(&left, 1, &Ball::new(0.5, 0.1).unwrap()),
            Err(SequenceError::EmptyRestriction { n: 1 })
        );

        // Only q ≥ 10 remain; brute-force check of the window.
        let n = BallSequence::rational_count(9) + 1;
        let b0 = Ball::new(0.5, 0.1).unwrap();
        let kept = restrict_to(&balls, n, &b0).unwrap();
        let mut brute = 0;
        for q in 10..=100u32 {
            for p in 0..=q {
                let c = f64::from(p) / f64::from(q);
                let r = f64::from(q).powi(-3);
                if (c - 0.5).abs() < 0.1 + r {
                    brute += 1;
                }
            }
        }
        assert_eq!(kept.len(), brute);
        for ib in &kept {
            let q = ib.ball.radius.powf(-1.0 / 3.0).round();
            assert!(q >= 10.0);
            assert!((ib.ball.center - 0.5).abs() < 0.1 + ib.ball.radius);
        }
    }

    #[test]
    fn dirichlet_balls_cover_nearly_everything() {
        // B(p/q, q^-3) rescaled by f(r) = r^{2/3} is B(p/q, q^-2).
        let seq = BallSequence::rational(3.0).unwrap();
        let f = DimensionFunction::power(2.0 / 3.0).unwrap();
        let x = AhlforsSpace::UnitInterval;
        for q_max in [10usize, 100, 1000] {
            let balls = seq.generate(&x, BallSequence::rational_count(q_max)).unwrap();
            let scaled: Vec<Ball> = balls.iter().map(|b| scale_ball(b, &f, 1.0, 1.0)).collect();
            let q = (balls[7].radius).powf(-1.0 / 3.0);
            assert_abs_diff_eq!(scaled[7].radius, q.powi(-2), epsilon = 1e-12);
            let covered = x.region_measure(&RegionUnion::from_balls(&scaled));
            // Dirichlet: every x has |x - p/q| < 1/(qQ) ≤ 1/q² with q ≤ Q.
            assert_abs_diff_eq!(covered, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn index_queries_agree_with_brute_force() {
        let seq = BallSequence::rational(3.0).unwrap();
        let balls = indexed(&seq.generate(&AhlforsSpace::UnitInterval, BallSequence::rational_count(60)).unwrap());
        let index = BallIndex::new(&balls);
        for (c, r, n) in [(0.3, 0.01, 1), (0.5, 1e-4, 20), (0.01, 0.02, 100), (0.77, 0.2, 7)] {
            let target = Ball::new(c, r).unwrap();
            let fast: Vec<usize> = index.intersecting(&target, n).iter().map(|b| b.index).collect();
            let slow: Vec<usize> = balls
                .iter()
                .filter(|b| b.index >= n && b.ball.intersects(&target))
                .map(|b| b.index)
                .collect();
            assert_eq!(fast, slow);
            let window = target.interval();
            let centers = index.centers_in(window);
            let slow = balls.iter().filter(|b| window.contains(b.ball.center)).count();
            assert_eq!(centers.len(), slow);
        }
    }
}
