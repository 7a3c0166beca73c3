//! Concrete Ahlfors regular spaces and the exact interval arithmetic the rest
//! of the crate is built on.
//!
//! Two one-dimensional spaces drive the pipeline: the unit interval with
//! Lebesgue measure (`δ = 1`) and the middle-third Cantor set at a finite
//! ternary depth with its natural measure (`δ = log 2 / log 3`). Both are
//! described by a closed support inside `[0, 1]` and a continuous cumulative
//! distribution, so every region measure reduces to differences of the CDF.
//! The unit square (`δ = 2`, sup metric) is available through
//! [`RegularSpace`] for ball-measure queries only.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Endpoints closer than this are merged when canonicalizing a region.
pub const MERGE_TOL: f64 = 1e-12;

/// Absolute slack used when walking ternary digits of a floating point value.
const CANTOR_TOL: f64 = 1e-13;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ball radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("ball center must be finite, got {0}")]
    BadCenter(f64),
    #[error("support region is empty")]
    EmptySupport,
    #[error("separation must be positive and finite, got {0}")]
    BadSeparation(f64),
    #[error("net point set is empty")]
    EmptyNet,
    #[error("cantor depth must lie in 1..=30, got {0}")]
    BadDepth(u32),
}

/// An open ball `B(center, radius)` on the line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: f64,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: f64, radius: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::BadCenter(center));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::BadRadius(radius));
        }
        Ok(Self { center, radius })
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.center - self.radius
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.center + self.radius
    }

    #[inline]
    pub fn diam(&self) -> f64 {
        2.0 * self.radius
    }

    /// Closed hull `[lo, hi]`.
    pub fn interval(&self) -> Interval {
        Interval::new(self.lo(), self.hi())
    }

    pub fn contains_point(&self, x: f64) -> bool {
        (x - self.center).abs() < self.radius
    }

    /// Open balls on the line meet iff their centers are closer than the sum
    /// of the radii.
    pub fn intersects(&self, other: &Ball) -> bool {
        self.lo().max(other.lo()) < self.hi().min(other.hi())
    }

    /// `self ⊂ other` as open intervals.
    pub fn is_inside(&self, other: &Ball) -> bool {
        self.lo() >= other.lo() && self.hi() <= other.hi()
    }

    /// Gap between the two balls (0 when they overlap).
    pub fn gap(&self, other: &Ball) -> f64 {
        ((self.center - other.center).abs() - self.radius - other.radius).max(0.0)
    }

    pub fn with_radius(&self, radius: f64) -> Ball {
        Ball {
            center: self.center,
            radius,
        }
    }
}

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// A finite union of intervals kept in canonical form: sorted, pairwise
/// disjoint, with components closer than [`MERGE_TOL`] merged.
///
/// Whether the components are read as open or closed is up to the caller;
/// the two readings differ by finitely many points, which carry no measure.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionUnion {
    parts: Vec<Interval>,
}

impl RegionUnion {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_intervals<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        let mut parts: Vec<Interval> = iter.into_iter().filter(|iv| iv.hi >= iv.lo).collect();
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(parts.len());
        for iv in parts {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi + MERGE_TOL => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Self { parts: merged }
    }

    pub fn from_balls<'a, I: IntoIterator<Item = &'a Ball>>(iter: I) -> Self {
        Self::from_intervals(iter.into_iter().map(Ball::interval))
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    /// Lebesgue length of the union.
    pub fn length(&self) -> f64 {
        self.parts.iter().map(Interval::len).sum()
    }

    pub fn intersect_interval(&self, window: Interval) -> Self {
        let parts = self
            .parts
            .iter()
            .filter_map(|iv| {
                let lo = iv.lo.max(window.lo);
                let hi = iv.hi.min(window.hi);
                (lo < hi).then(|| Interval::new(lo, hi))
            })
            .collect();
        Self { parts }
    }

    pub fn intersect(&self, other: &RegionUnion) -> Self {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo < hi {
                out.push(Interval::new(lo, hi));
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { parts: out }
    }

    /// Component containing `x` (closed reading).
    pub fn component_of(&self, x: f64) -> Option<Interval> {
        let k = self.parts.partition_point(|iv| iv.hi < x);
        self.parts.get(k).copied().filter(|iv| iv.lo <= x)
    }

    /// Component that contains the whole of `iv` (closed reading), if any.
    pub fn component_containing(&self, iv: Interval) -> Option<Interval> {
        self.component_of(iv.lo).filter(|c| iv.hi <= c.hi)
    }

    pub fn hull(&self) -> Option<Interval> {
        Some(Interval::new(self.parts.first()?.lo, self.parts.last()?.hi))
    }
}

/// Exponent and comparability constants of an Ahlfors regular measure:
/// `c1 r^δ ≤ μ(B(x, r)) ≤ c2 r^δ` for centers in the support and
/// `r_min ≤ r ≤ r0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub delta: f64,
    pub c1: f64,
    pub c2: f64,
    pub r0: f64,
    /// Finite-resolution floor (0 for the continuum spaces).
    pub r_min: f64,
}

/// Common surface of the concrete spaces.
pub trait RegularSpace {
    type Point: Copy;

    fn regularity(&self) -> Regularity;
    fn distance(&self, a: Self::Point, b: Self::Point) -> f64;
    fn ball_measure_at(&self, center: Self::Point, radius: f64) -> f64;
    fn contains(&self, p: Self::Point) -> bool;
    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    fn delta(&self) -> f64 {
        self.regularity().delta
    }
}

/// The one-dimensional spaces the pipeline runs on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AhlforsSpace {
    UnitInterval,
    /// Middle-third Cantor set resolved to `depth` ternary digits: the union
    /// of the `2^depth` surviving closed cylinders, each carrying mass
    /// `2^-depth` spread uniformly.
    CantorTernary {
        depth: u32,
    },
}

impl AhlforsSpace {
    pub fn unit_interval() -> Self {
        Self::UnitInterval
    }

    pub fn cantor(depth: u32) -> Result<Self, GeometryError> {
        if !(1..=30).contains(&depth) {
            return Err(GeometryError::BadDepth(depth));
        }
        Ok(Self::CantorTernary { depth })
    }

    pub fn delta(&self) -> f64 {
        match self {
            Self::UnitInterval => 1.0,
            Self::CantorTernary { .. } => cantor_dimension(),
        }
    }

    pub fn regularity(&self) -> Regularity {
        match *self {
            Self::UnitInterval => Regularity {
                delta: 1.0,
                c1: 0.5,
                c2: 2.0,
                r0: 1.0,
                r_min: 0.0,
            },
            // A ball of radius r ∈ (3^-(k+1), 3^-k] around a Cantor point
            // holds the depth-(k+2) cylinder of the center and meets at most
            // two depth-k cylinders.
            Self::CantorTernary { depth } => Regularity {
                delta: cantor_dimension(),
                c1: 0.25,
                c2: 4.0,
                r0: 1.0,
                r_min: 3f64.powi(-(depth as i32)),
            },
        }
    }

    /// Cumulative distribution of the space's natural probability measure.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::UnitInterval => x.clamp(0.0, 1.0),
            Self::CantorTernary { depth } => cantor_cdf(x, depth),
        }
    }

    /// Measure of the interval between `lo` and `hi` (open or closed alike).
    pub fn interval_measure(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn ball_measure(&self, b: &Ball) -> f64 {
        self.interval_measure(b.lo(), b.hi())
    }

    /// Exact sum of the member measures; members of a canonical region are
    /// disjoint.
    pub fn region_measure(&self, r: &RegionUnion) -> f64 {
        r.parts().iter().map(|iv| self.interval_measure(iv.lo, iv.hi)).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Self::UnitInterval => (0.0..=1.0).contains(&x),
            Self::CantorTernary { depth } => cantor_next(x - CANTOR_TOL, depth).is_some_and(|s| s <= x + CANTOR_TOL),
        }
    }

    /// Smallest point of the support that is `≥ y`.
    pub fn next_in_support(&self, y: f64) -> Option<f64> {
        match *self {
            Self::UnitInterval => (y <= 1.0).then(|| y.max(0.0)),
            Self::CantorTernary { depth } => cantor_next(y, depth),
        }
    }

    /// Largest point of the support that is `≤ y`.
    pub fn prev_in_support(&self, y: f64) -> Option<f64> {
        match *self {
            Self::UnitInterval => (y >= 0.0).then(|| y.min(1.0)),
            // The Cantor set is symmetric under x ↦ 1 - x.
            Self::CantorTernary { depth } => cantor_next(1.0 - y, depth).map(|s| 1.0 - s),
        }
    }

    /// Smallest support point inside the closed interval, if any.
    pub fn first_support_point_in(&self, iv: Interval) -> Option<f64> {
        self.next_in_support(iv.lo).filter(|&s| s <= iv.hi)
    }

    /// Largest support point inside the closed interval, if any.
    pub fn last_support_point_in(&self, iv: Interval) -> Option<f64> {
        self.prev_in_support(iv.hi).filter(|&s| s >= iv.lo)
    }

    /// Draws a point from the natural measure.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::UnitInterval => rng.random::<f64>(),
            Self::CantorTernary { depth } => {
                let mut lo = 0.0;
                let mut len = 1.0;
                for _ in 0..depth {
                    len /= 3.0;
                    if rng.random::<bool>() {
                        lo += 2.0 * len;
                    }
                }
                lo + len * rng.random::<f64>()
            }
        }
    }

    /// Draws a point from the natural measure conditioned on the interval.
    /// Falls back to `None` when the interval carries no mass.
    pub fn sample_in<R: Rng + ?Sized>(&self, rng: &mut R, iv: Interval) -> Option<f64> {
        let (a, b) = (self.cdf(iv.lo), self.cdf(iv.hi));
        if b <= a {
            return None;
        }
        let u = a + (b - a) * rng.random::<f64>();
        Some(self.quantile(u).clamp(iv.lo, iv.hi))
    }

    /// Inverse of [`AhlforsSpace::cdf`] on the support.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Self::UnitInterval => u,
            Self::CantorTernary { depth } => {
                let mut lo = 0.0;
                let mut len = 1.0;
                let mut v = u;
                for _ in 0..depth {
                    len /= 3.0;
                    if v < 0.5 {
                        v *= 2.0;
                    } else {
                        lo += 2.0 * len;
                        v = 2.0 * v - 1.0;
                    }
                }
                lo + len * v
            }
        }
    }

    /// Distance from `support` to the complement `X ∖ open_region`, where the
    /// components of `open_region` are read as open intervals and `X` is the
    /// support of the space. Exact in one dimension: only the gaps flanking the
    /// component that holds each support piece matter.
    pub fn distance_to_complement(&self, support: &RegionUnion, open_region: &RegionUnion) -> Clearance {
        let mut best = f64::INFINITY;
        for piece in support.parts() {
            // Ignore pieces that carry no support points at all.
            let (Some(first), Some(last)) = (self.first_support_point_in(*piece), self.last_support_point_in(*piece)) else {
                continue;
            };
            let Some(comp) = open_region.component_containing(Interval::new(first, last)) else {
                return Clearance::boundary();
            };
            if first <= comp.lo || last >= comp.hi {
                return Clearance::boundary();
            }
            let left = self.prev_in_support(comp.lo).map_or(f64::INFINITY, |s| first - s);
            let right = self.next_in_support(comp.hi).map_or(f64::INFINITY, |s| s - last);
            best = best.min(left).min(right);
        }
        if best <= 0.0 {
            Clearance::boundary()
        } else {
            Clearance {
                distance: best,
                touches_boundary: false,
            }
        }
    }

    /// Whether every support point of the open ball lies in the open region.
    pub fn ball_within(&self, ball: &Ball, open_region: &RegionUnion) -> bool {
        let (lo, hi) = (ball.lo(), ball.hi());
        // Stretches of (lo, hi) not covered by an open component must be free
        // of support points. `cursor_open` says whether `cursor` itself is
        // excluded from the stretch still to be checked.
        let mut cursor = lo;
        let mut cursor_open = true;
        for comp in open_region.parts() {
            if comp.hi <= cursor {
                continue;
            }
            if comp.lo >= hi {
                break;
            }
            if (comp.lo > cursor || !cursor_open) && self.support_between(cursor, cursor_open, comp.lo, false) {
                return false;
            }
            cursor = comp.hi;
            cursor_open = false;
            if cursor >= hi {
                return true;
            }
        }
        !self.support_between(cursor, cursor_open, hi, true)
    }

    /// Whether the support meets the stretch from `a` to `b`, with each end
    /// included or excluded as flagged.
    fn support_between(&self, a: f64, a_open: bool, b: f64, b_open: bool) -> bool {
        if b < a {
            return false;
        }
        if !a_open && self.contains(a) {
            return true;
        }
        if !b_open && self.contains(b) {
            return true;
        }
        if b == a {
            return false;
        }
        match *self {
            Self::UnitInterval => a.max(0.0) < b.min(1.0),
            Self::CantorTernary { depth } => {
                let Some(s) = cantor_next(a, depth) else {
                    return false;
                };
                if s > a {
                    return s < b;
                }
                // `a` is a support point; look just beyond it.
                let eta = ((b - a) * 0.5).min(3f64.powi(-(depth as i32)) * 1e-3);
                cantor_next(a + eta, depth).is_some_and(|t| t < b)
            }
        }
    }
}

/// Outcome of [`AhlforsSpace::distance_to_complement`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clearance {
    pub distance: f64,
    /// Set when the support reaches the boundary of the open region; the
    /// distance is then 0 and no positive radius fits.
    pub touches_boundary: bool,
}

impl Clearance {
    fn boundary() -> Self {
        Self {
            distance: 0.0,
            touches_boundary: true,
        }
    }
}

impl RegularSpace for AhlforsSpace {
    type Point = f64;

    fn regularity(&self) -> Regularity {
        AhlforsSpace::regularity(self)
    }

    fn distance(&self, a: f64, b: f64) -> f64 {
        (a - b).abs()
    }

    fn ball_measure_at(&self, center: f64, radius: f64) -> f64 {
        self.interval_measure(center - radius, center + radius)
    }

    fn contains(&self, p: f64) -> bool {
        AhlforsSpace::contains(self, p)
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample(rng)
    }
}

/// `[0, 1]^2` with the sup metric and Lebesgue measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitSquare;

impl RegularSpace for UnitSquare {
    type Point = [f64; 2];

    fn regularity(&self) -> Regularity {
        // A corner ball of radius r ≤ 1 keeps an r × r quarter; a full ball
        // has area 4r².
        Regularity {
            delta: 2.0,
            c1: 0.5,
            c2: 4.0,
            r0: 1.0,
            r_min: 0.0,
        }
    }

    fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    }

    fn ball_measure_at(&self, c: [f64; 2], r: f64) -> f64 {
        let side = |x: f64| ((x + r).min(1.0) - (x - r).max(0.0)).max(0.0);
        side(c[0]) * side(c[1])
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p.iter().all(|x| (0.0..=1.0).contains(x))
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        [rng.random(), rng.random()]
    }
}

pub fn cantor_dimension() -> f64 {
    std::f64::consts::LN_2 / 3f64.ln()
}

/// Point of `[0, 1]` with the given ternary digits (each in `{0, 1, 2}`).
pub fn from_ternary_digits(digits: &[u8]) -> f64 {
    let mut x = 0.0;
    let mut scale = 1.0;
    for &d in digits {
        scale /= 3.0;
        x += f64::from(d) * scale;
    }
    x
}

/// First `depth` ternary digits of a Cantor-space point, resolved toward the
/// cylinder the point sits in (so every digit is 0 or 2 for support points).
pub fn cantor_digits(x: f64, depth: u32) -> Option<Vec<u8>> {
    let mut lo = 0.0;
    let mut len = 1.0;
    let mut digits = Vec::with_capacity(depth as usize);
    if !(-CANTOR_TOL..=1.0 + CANTOR_TOL).contains(&x) {
        return None;
    }
    for _ in 0..depth {
        let third = len / 3.0;
        let t = x - lo;
        if t <= third + CANTOR_TOL {
            digits.push(0);
        } else if t >= 2.0 * third - CANTOR_TOL {
            digits.push(2);
            lo += 2.0 * third;
        } else {
            return None;
        }
        len = third;
    }
    Some(digits)
}

fn cantor_cdf(x: f64, depth: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let mut lo = 0.0;
    let mut len = 1.0;
    let mut mass = 0.0;
    let mut w = 1.0;
    for _ in 0..depth {
        let third = len / 3.0;
        let t = x - lo;
        w *= 0.5;
        if t < third {
            len = third;
        } else if t < 2.0 * third {
            return mass + w;
        } else {
            mass += w;
            lo += 2.0 * third;
            len = third;
        }
    }
    mass + w * ((x - lo) / len).clamp(0.0, 1.0)
}

fn cantor_next(y: f64, depth: u32) -> Option<f64> {
    if y > 1.0 {
        return None;
    }
    if y <= 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut len = 1.0;
    for _ in 0..depth {
        let third = len / 3.0;
        let t = y - lo;
        if t <= third {
            len = third;
        } else if t <= 2.0 * third {
            return Some(lo + 2.0 * third);
        } else {
            lo += 2.0 * third;
            len = third;
        }
    }
    // The walk keeps y inside the final cylinder [lo, lo + len].
    Some(y.max(lo).min(lo + len))
}

/// Greedy left-to-right maximal `sep`-separated subset of the support points
/// lying in `support`.
///
/// Each chosen point is the smallest support point at distance `≥ sep` from
/// the previous one, so every support point lies within `sep` of the net.
pub fn maximal_separated_net(space: &AhlforsSpace, support: &RegionUnion, sep: f64) -> Result<Vec<f64>, GeometryError> {
    if !(sep > 0.0 && sep.is_finite()) {
        return Err(GeometryError::BadSeparation(sep));
    }
    let mut net = Vec::new();
    walk_net(space, support, sep, usize::MAX, |x| net.push(x));
    if net.is_empty() {
        return Err(GeometryError::EmptySupport);
    }
    Ok(net)
}

/// Number of points [`maximal_separated_net`] would return, without storing
/// them. Counting stops once it exceeds `cap`.
pub fn separated_net_size(space: &AhlforsSpace, support: &RegionUnion, sep: f64, cap: usize) -> usize {
    walk_net(space, support, sep, cap, |_| {})
}

fn walk_net(space: &AhlforsSpace, support: &RegionUnion, sep: f64, cap: usize, mut emit: impl FnMut(f64)) -> usize {
    let mut count = 0usize;
    let mut cursor = f64::NEG_INFINITY;
    for piece in support.parts() {
        let mut from = piece.lo.max(cursor);
        while from <= piece.hi {
            let Some(x) = space.first_support_point_in(Interval::new(from, piece.hi)) else {
                break;
            };
            emit(x);
            count += 1;
            if count > cap {
                return count;
            }
            cursor = x + sep;
            // Rounding can leave the sum a hair short of `sep`.
            while cursor - x < sep {
                cursor = cursor.next_up();
            }
            from = cursor;
        }
    }
    count
}

/// Index of the net point nearest to `x`; ties go to the lowest index.
pub fn nearest_net_point(x: f64, net: &[f64]) -> Result<usize, GeometryError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &p) in net.iter().enumerate() {
        let d = (x - p).abs();
        // Distances equal up to rounding count as ties.
        if best.is_none_or(|(_, bd)| d < bd - MERGE_TOL) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(GeometryError::EmptyNet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    #[test]
    fn ball_measure_in_the_interval() {
        let x = AhlforsSpace::unit_interval();
        assert_abs_diff_eq!(x.ball_measure(&Ball::new(0.5, 0.1).unwrap()), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(x.ball_measure(&Ball::new(0.05, 0.1).unwrap()), 0.15, epsilon = 1e-15);
    }

    #[test]
    fn cantor_cylinder_mass() {
        let x = AhlforsSpace::cantor(6).unwrap();
        // Cylinder 0.020… of depth 3 is [2/27, 3/27].
        let lo = from_ternary_digits(&[0, 2, 0]);
        let len = 1.0 / 27.0;
        let b = Ball::new(lo + len / 2.0, len / 2.0).unwrap();
        assert_abs_diff_eq!(x.ball_measure(&b), 0.125, epsilon = 1e-12);
    }

    #[test]
    fn bad_balls_are_rejected() {
        assert!(Ball::new(0.5, 0.0).is_err());
        assert!(Ball::new(0.5, f64::INFINITY).is_err());
        assert!(Ball::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn region_measure_examples() {
        let x = AhlforsSpace::unit_interval();
        let r = RegionUnion::from_intervals([iv(0.0, 0.5), iv(0.25, 0.75)]);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(x.region_measure(&r), 0.75, epsilon = 1e-15);
        assert_eq!(x.region_measure(&RegionUnion::empty()), 0.0);
        let r = RegionUnion::from_intervals([iv(0.0, 0.2), iv(0.5, 0.6)]);
        assert_abs_diff_eq!(x.region_measure(&r), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn near_touching_endpoints_merge() {
        let r = RegionUnion::from_intervals([iv(0.0, 0.3), iv(0.3 + 1e-13, 0.6)]);
        assert_eq!(r.len(), 1);
        let r = RegionUnion::from_intervals([iv(0.0, 0.3), iv(0.3 + 1e-9, 0.6)]);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn distance_to_complement_examples() {
        let x = AhlforsSpace::unit_interval();
        let region = RegionUnion::from_intervals([iv(0.4, 0.7)]);
        let c = x.distance_to_complement(&RegionUnion::from_intervals([iv(0.5, 0.5)]), &region);
        assert_abs_diff_eq!(c.distance, 0.1, epsilon = 1e-15);
        assert!(!c.touches_boundary);
        let c = x.distance_to_complement(&RegionUnion::from_intervals([iv(0.45, 0.55)]), &region);
        assert_abs_diff_eq!(c.distance, 0.05, epsilon = 1e-15);
        let c = x.distance_to_complement(&RegionUnion::from_intervals([iv(0.4, 0.4)]), &region);
        assert_eq!(c.distance, 0.0);
        assert!(c.touches_boundary);
    }

    #[test]
    fn complement_excludes_points_outside_the_space() {
        // X ∖ (-0.1, 0.5) = [0.5, 1]: the left end of the space is covered.
        let x = AhlforsSpace::unit_interval();
        let region = RegionUnion::from_intervals([iv(-0.1, 0.5)]);
        let c = x.distance_to_complement(&RegionUnion::from_intervals([iv(0.2, 0.2)]), &region);
        assert_abs_diff_eq!(c.distance, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn separated_net_examples() {
        let x = AhlforsSpace::unit_interval();
        let net = maximal_separated_net(&x, &RegionUnion::from_intervals([iv(0.0, 1.0)]), 0.35).unwrap();
        assert_eq!(net.len(), 3);
        assert_abs_diff_eq!(net[0], 0.0);
        assert_abs_diff_eq!(net[1], 0.35);
        assert_abs_diff_eq!(net[2], 0.70, epsilon = 1e-15);

        let net = maximal_separated_net(&x, &RegionUnion::from_intervals([iv(0.2, 0.3)]), 0.5).unwrap();
        assert_eq!(net, vec![0.2]);

        let net = maximal_separated_net(&x, &RegionUnion::from_intervals([iv(0.0, 0.1), iv(0.9, 1.0)]), 0.5).unwrap();
        assert_eq!(net, vec![0.0, 0.9]);

        assert_eq!(
            maximal_separated_net(&x, &RegionUnion::empty(), 0.5),
            Err(GeometryError::EmptySupport)
        );
        assert!(maximal_separated_net(&x, &RegionUnion::from_intervals([iv(0.0, 1.0)]), 0.0).is_err());
    }

    #[test]
    fn net_size_matches_materialized_net() {
        let x = AhlforsSpace::unit_interval();
        let support = RegionUnion::from_intervals([iv(0.0, 0.1), iv(0.13, 0.5), iv(0.52, 0.521)]);
        for sep in [0.001, 0.01, 0.03, 0.2] {
            let net = maximal_separated_net(&x, &support, sep).unwrap();
            assert_eq!(separated_net_size(&x, &support, sep, usize::MAX), net.len(), "sep {sep}");
        }
    }

    #[test]
    fn nearest_point_examples() {
        let net = [0.0, 0.35, 0.7];
        assert_eq!(nearest_net_point(0.3, &net).unwrap(), 1);
        assert_eq!(nearest_net_point(0.7, &net).unwrap(), 2);
        // 0.4 is equidistant from 0.2 (index 0) and 0.6 (index 2).
        assert_eq!(nearest_net_point(0.4, &[0.2, 0.9, 0.6]).unwrap(), 0);
        assert_eq!(nearest_net_point(0.4, &[]), Err(GeometryError::EmptyNet));
    }

    #[test]
    fn cantor_support_walk() {
        let x = AhlforsSpace::cantor(8).unwrap();
        assert!(x.contains(0.0));
        assert!(x.contains(1.0));
        assert!(x.contains(2.0 / 3.0));
        assert!(x.contains(0.25)); // 0.0202…₃
        assert!(!x.contains(0.5));
        assert_abs_diff_eq!(x.next_in_support(0.5).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.prev_in_support(0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(x.next_in_support(1.5), None);
        assert_eq!(cantor_digits(0.25, 4).unwrap(), vec![0, 2, 0, 2]);
        assert!(cantor_digits(0.5, 4).is_none());
    }

    #[test]
    fn cantor_complement_uses_support_points_only() {
        let x = AhlforsSpace::cantor(10).unwrap();
        // Region (0.3, 0.7) covers the gap (1/3, 2/3); the nearest support
        // points outside are the ends of the depth-2 cylinders [2/9, 1/3] and
        // [2/3, 7/9], which are inside the region too, so the complement
        // starts just below 0.3 and just above 0.7.
        let region = RegionUnion::from_intervals([iv(0.3, 0.7)]);
        let support = RegionUnion::from_intervals([iv(1.0 / 3.0 - 1e-3, 1.0 / 3.0)]);
        let c = x.distance_to_complement(&support, &region);
        assert!(!c.touches_boundary);
        let left = x.prev_in_support(0.3).unwrap();
        let first = x.next_in_support(1.0 / 3.0 - 1e-3).unwrap();
        let right = x.next_in_support(0.7).unwrap();
        assert_abs_diff_eq!(c.distance, (first - left).min(right - 1.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn ball_within_region() {
        let x = AhlforsSpace::unit_interval();
        let region = RegionUnion::from_intervals([iv(0.1, 0.4), iv(0.6, 0.9)]);
        assert!(x.ball_within(&Ball::new(0.2, 0.1).unwrap(), &region));
        assert!(!x.ball_within(&Ball::new(0.2, 0.15).unwrap(), &region));
        assert!(!x.ball_within(&Ball::new(0.5, 0.2).unwrap(), &region));
        // The gap (0.4, 0.6) holds no Cantor points once it is inside (1/3, 2/3).
        let c = AhlforsSpace::cantor(10).unwrap();
        let region = RegionUnion::from_intervals([iv(0.3, 0.34), iv(0.66, 0.7)]);
        assert!(c.ball_within(&Ball::new(0.5, 0.19).unwrap(), &region));
        assert!(!x.ball_within(&Ball::new(0.5, 0.19).unwrap(), &region));
    }

    #[test]
    fn square_ball_measure() {
        let s = UnitSquare;
        assert_abs_diff_eq!(s.ball_measure_at([0.5, 0.5], 0.1), 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(s.ball_measure_at([0.0, 0.0], 0.1), 0.01, epsilon = 1e-15);
        assert_eq!(s.distance([0.0, 0.0], [0.3, -0.5]), 0.5);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let x = AhlforsSpace::cantor(12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let u: f64 = rng.random();
            let p = x.quantile(u);
            assert!(x.contains(p));
            assert_abs_diff_eq!(x.cdf(p), u, epsilon = 1e-9);
        }
    }
}
