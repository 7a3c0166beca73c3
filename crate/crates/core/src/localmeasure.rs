//! The probability measure spread over a disjoint selection of balls, with
//! weights proportional to the measure of their rescaled versions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{greedy_select, SelectionResult, SelectionStatus};
use crate::dimfn::DimensionFunction;
use crate::geometry::{AhlforsSpace, Ball, Interval, RegionUnion};
use crate::rng::stream_rng;
use crate::sequences::IndexedBall;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LocalMeasureError {
    #[error("radii too large for this C (C = {c}): no index cutoff makes f(r)/C >= (2r)^delta on the whole tail")]
    RadiiTooLarge { c: f64 },
    #[error("greedy selection captured only {fraction:.6} of the target ball (cutoff {n_effective})")]
    Partial { fraction: f64, n_effective: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("atom {index} carries no measure")]
    NullAtom { index: usize },
}

/// One selected ball with its share of the mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    /// The ball carrying the mass.
    pub ball: Ball,
    /// `B_i^{f/C}`.
    pub rescaled: Ball,
    pub weight: f64,
    /// `H(ball)`.
    pub measure: f64,
    cdf_lo: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedBallMeasure {
    pub space: AhlforsSpace,
    /// Sorted by left endpoint; pairwise disjoint.
    pub atoms: Vec<Atom>,
    pub k: f64,
    pub parent: Ball,
    pub n_requested: usize,
    pub n_effective: usize,
    pub c: f64,
    pub f: DimensionFunction,
    pub delta: f64,
    /// `Σ_{j<i} w_j` over the sorted atoms, with a final entry of exactly 1.
    prefix: Vec<f64>,
}

/// Smallest `N' ≥ n` such that every ball with index `≥ N'` satisfies
/// `f(ρ_i)/C ≥ (2ρ_i)^δ`, so that `B_i ⊂ B_i^{f/C}`.
pub fn effective_cutoff(balls: &[IndexedBall], f: &DimensionFunction, delta: f64, c: f64, n: usize) -> Option<usize> {
    let last = balls.iter().map(|b| b.index).max()?;
    let worst = balls
        .iter()
        .filter(|b| b.index >= n && f.eval(b.ball.radius) / c < (2.0 * b.ball.radius).powf(delta))
        .map(|b| b.index)
        .max();
    let cut = worst.map_or(n, |i| i + 1).max(n);
    (cut <= last).then_some(cut)
}

/// Builds `μ(B₀, N)` after raising `N` as needed.
pub fn build_local_measure(
    space: &AhlforsSpace,
    balls: &[IndexedBall],
    f: &DimensionFunction,
    delta: f64,
    c: f64,
    b0: &Ball,
    n: usize,
) -> Result<WeightedBallMeasure, LocalMeasureError> {
    let n_eff = effective_cutoff(balls, f, delta, c, n).ok_or(LocalMeasureError::RadiiTooLarge { c })?;
    let selection = greedy_select(space, balls, f, delta, c, b0, n_eff);
    if let SelectionStatus::Partial { fraction } = selection.status {
        return Err(LocalMeasureError::Partial {
            fraction,
            n_effective: n_eff,
        });
    }
    WeightedBallMeasure::from_selection(space, &selection, f, delta, c, b0, n, n_eff)
}

impl WeightedBallMeasure {
    /// Normalizes an existing selection, successful or not.
    #[allow(clippy::too_many_arguments)]
    pub fn from_selection(
        space: &AhlforsSpace,
        selection: &SelectionResult,
        f: &DimensionFunction,
        delta: f64,
        c: f64,
        b0: &Ball,
        n_requested: usize,
        n_effective: usize,
    ) -> Result<Self, LocalMeasureError> {
        if selection.selected.is_empty() {
            return Err(LocalMeasureError::EmptySelection);
        }
        let raw: Vec<(IndexedBall, Ball, f64)> = selection
            .selected
            .iter()
            .zip(&selection.rescaled)
            .map(|(ib, rb)| (*ib, *rb, space.ball_measure(rb)))
            .collect();
        let k: f64 = raw.iter().map(|r| r.2).sum();
        let atoms = raw
            .into_iter()
            .map(|(ib, rescaled, h)| Atom {
                index: ib.index,
                ball: ib.ball,
                rescaled,
                weight: h / k,
                measure: 0.0,
                cdf_lo: 0.0,
            })
            .collect();
        let mut mu = Self {
            space: *space,
            atoms,
            k,
            parent: *b0,
            n_requested,
            n_effective,
            c,
            f: *f,
            delta,
            prefix: Vec::new(),
        };
        mu.finish()?;
        Ok(mu)
    }

    fn finish(&mut self) -> Result<(), LocalMeasureError> {
        self.atoms.sort_by(|a, b| a.ball.lo().total_cmp(&b.ball.lo()));
        for atom in &mut self.atoms {
            atom.cdf_lo = self.space.cdf(atom.ball.lo());
            atom.measure = self.space.cdf(atom.ball.hi()) - atom.cdf_lo;
            if atom.measure <= 0.0 {
                return Err(LocalMeasureError::NullAtom { index: atom.index });
            }
        }
        let mut acc = 0.0;
        self.prefix = Vec::with_capacity(self.atoms.len() + 1);
        for atom in &self.atoms {
            self.prefix.push(acc);
            acc += atom.weight;
        }
        self.prefix.push(1.0);
        Ok(())
    }

    /// Same weights, each atom replaced by the concentric ball of
    /// `factor` times its radius.
    pub fn shrink_atoms(&self, factor: f64) -> Result<Self, LocalMeasureError> {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.ball = atom.ball.with_radius(atom.ball.radius * factor);
        }
        out.finish()?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `K / H(B₀)`.
    pub fn k_ratio(&self) -> f64 {
        self.k / self.space.ball_measure(&self.parent)
    }

    /// Closed atom intervals.
    pub fn support(&self) -> RegionUnion {
        RegionUnion::from_intervals(self.atoms.iter().map(|a| a.ball.interval()))
    }

    pub fn min_atom_radius(&self) -> f64 {
        self.atoms.iter().map(|a| a.ball.radius).fold(f64::INFINITY, f64::min)
    }

    /// `μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| a.ball.lo() < x);
        if k == 0 {
            return 0.0;
        }
        let atom = &self.atoms[k - 1];
        if x >= atom.ball.hi() {
            return self.prefix[k];
        }
        let frac = ((self.space.cdf(x) - atom.cdf_lo) / atom.measure).clamp(0.0, 1.0);
        self.prefix[k - 1] + atom.weight * frac
    }

    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Indices into `atoms` of the atoms meeting the open interval.
    pub fn atoms_meeting(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.atoms.partition_point(|at| at.ball.hi() <= lo);
        let z = self.atoms.partition_point(|at| at.ball.lo() < hi);
        a..z.max(a)
    }

    /// Draws a point from `μ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.prefix[1..].partition_point(|&p| p <= u).min(self.atoms.len() - 1);
        let atom = &self.atoms[k];
        self.space.sample_in(rng, atom.ball.interval()).unwrap_or(atom.ball.center)
    }
}

/// `μ(B)`.
pub fn query_local(mu: &WeightedBallMeasure, b: &Ball) -> f64 {
    mu.mass_between(b.lo(), b.hi())
}

/// `μ` of a finite union of intervals.
pub fn query_region(mu: &WeightedBallMeasure, region: &RegionUnion) -> f64 {
    region.parts().iter().map(|p| mu.mass_between(p.lo, p.hi)).sum()
}

pub const HISTOGRAM_BINS: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub samples: u64,
    pub worst_ratio: f64,
    pub worst_ball: Option<Ball>,
    /// Bin 0 counts zero ratios; bin `j ≥ 1` counts ratios in decade
    /// `10^{j-10}`, with the end bins absorbing everything beyond.
    pub histogram: [u64; HISTOGRAM_BINS],
    pub multi_atom_checks: u64,
    pub multi_atom_violations: u64,
    pub single_atom_checks: u64,
    /// Largest `μ(B) C K / f(ρ)` over balls meeting a single atom.
    pub single_atom_worst: f64,
    pub single_atom_violations: u64,
    /// Largest ratio found by the endpoint search (sampling excluded).
    pub extremal_worst: f64,
}

impl Default for BoundReport {
    fn default() -> Self {
        Self {
            samples: 0,
            worst_ratio: 0.0,
            worst_ball: None,
            histogram: [0; HISTOGRAM_BINS],
            multi_atom_checks: 0,
            multi_atom_violations: 0,
            single_atom_checks: 0,
            single_atom_worst: 0.0,
            single_atom_violations: 0,
            extremal_worst: 0.0,
        }
    }
}

fn better(a: (f64, Option<Ball>), b: (f64, Option<Ball>)) -> (f64, Option<Ball>) {
    let key = |x: &(f64, Option<Ball>)| x.1.map_or((f64::INFINITY, f64::INFINITY), |b| (b.center, b.radius));
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            let (ka, kb) = (key(&a), key(&b));
            if (ka.0, ka.1) <= (kb.0, kb.1) {
                a
            } else {
                b
            }
        }
    }
}

impl BoundReport {
    /// Associative and commutative combination.
    pub fn merge(mut self, other: &BoundReport) -> BoundReport {
        let (w, b) = better((self.worst_ratio, self.worst_ball), (other.worst_ratio, other.worst_ball));
        self.worst_ratio = w;
        self.worst_ball = b;
        self.samples += other.samples;
        for (a, b) in self.histogram.iter_mut().zip(other.histogram) {
            *a += b;
        }
        self.multi_atom_checks += other.multi_atom_checks;
        self.multi_atom_violations += other.multi_atom_violations;
        self.single_atom_checks += other.single_atom_checks;
        self.single_atom_worst = self.single_atom_worst.max(other.single_atom_worst);
        self.single_atom_violations += other.single_atom_violations;
        self.extremal_worst = self.extremal_worst.max(other.extremal_worst);
        self
    }

    fn bin(ratio: f64) -> usize {
        if ratio <= 0.0 {
            return 0;
        }
        (ratio.log10().floor() as i64 + 10).clamp(1, HISTOGRAM_BINS as i64 - 1) as usize
    }
}

/// The comparison scale `max((ρ/diam B₀)^δ, f(ρ)/C)`.
pub fn bound_scale(mu: &WeightedBallMeasure, rho: f64) -> f64 {
    let d = mu.parent.diam();
    (rho / d).powf(mu.delta).max(mu.f.eval(rho) / mu.c)
}

/// Allowed value of `μ(B) C K / f(ρ)` for a ball meeting a single atom.
pub fn single_atom_factor(space: &AhlforsSpace, delta: f64) -> f64 {
    let reg = space.regularity();
    reg.c2 * reg.c2 / reg.c1 * 2f64.powf(delta)
}

const REL_SLACK: f64 = 1e-9;

struct Checker<'a> {
    mu: &'a WeightedBallMeasure,
    single_factor: f64,
}

impl Checker<'_> {
    fn record(&self, report: &mut BoundReport, b: Ball, count_sample: bool) -> f64 {
        let mu = self.mu;
        let mass = query_local(mu, &b);
        let ratio = mass / bound_scale(mu, b.radius);
        if count_sample {
            report.samples += 1;
            report.histogram[BoundReport::bin(ratio)] += 1;
        }
        let (w, wb) = better((report.worst_ratio, report.worst_ball), (ratio, Some(b)));
        report.worst_ratio = w;
        report.worst_ball = wb;

        let met = mu.atoms_meeting(b.lo(), b.hi());
        if met.len() >= 2 {
            report.multi_atom_checks += 1;
            let bad = mu.atoms[met]
                .iter()
                .any(|a| 0.5 * a.rescaled.radius > 2.0 * b.radius * (1.0 + REL_SLACK));
            if bad {
                report.multi_atom_violations += 1;
            }
        } else if met.len() == 1 && mass > 0.0 {
            report.single_atom_checks += 1;
            let normalized = mass * mu.c * mu.k / mu.f.eval(b.radius);
            report.single_atom_worst = report.single_atom_worst.max(normalized);
            if normalized > self.single_factor * (1.0 + REL_SLACK) {
                report.single_atom_violations += 1;
            }
        }
        ratio
    }
}

/// Samples test balls and runs the targeted families and the endpoint
/// search. Deterministic in `seed`.
pub fn verify_star_hypothesis(mu: &WeightedBallMeasure, n_samples: u64, seed: u64) -> BoundReport {
    let checker = Checker {
        mu,
        single_factor: single_atom_factor(&mu.space, mu.delta),
    };
    let rho_lo = mu.min_atom_radius() / 10.0;
    let rho_hi = mu.parent.diam();
    let (ln_lo, ln_hi) = (rho_lo.ln(), rho_hi.ln());
    let b0_iv = mu.parent.interval();

    const CHUNK: u64 = 1024;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<BoundReport> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, chunk + 1);
            let mut report = BoundReport::default();
            let first = chunk * CHUNK;
            for j in first..(first + CHUNK).min(n_samples) {
                let x = if j % 2 == 0 {
                    mu.space.sample_in(&mut rng, b0_iv).unwrap_or(mu.parent.center)
                } else {
                    mu.sample(&mut rng)
                };
                let rho = (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp();
                checker.record(&mut report, Ball { center: x, radius: rho }, true);
            }
            report
        })
        .collect();
    let mut report = parts.iter().fold(BoundReport::default(), |acc, p| acc.merge(p));

    for atom in &mu.atoms {
        let x = atom.ball.center;
        for r in [
            atom.ball.radius * 0.5,
            atom.ball.radius,
            atom.rescaled.radius,
            2.0 * atom.rescaled.radius,
            4.0 * atom.rescaled.radius,
        ] {
            checker.record(&mut report, Ball { center: x, radius: r }, false);
        }
    }

    let ext = extremal_search_from(mu, rho_lo, rho_hi, (report.worst_ratio, report.worst_ball));
    report.extremal_worst = ext.0;
    if let Some(b) = ext.1 {
        checker.record(&mut report, b, false);
    }
    report
}

/// Largest `μ(B(x, ρ)) / bound_scale(ρ)` over `ρ ∈ [rho_lo, rho_hi]`.
///
/// On the interval with a power-law `f` the density of `μ` is piecewise
/// constant, so the ratio is maximized with both ends of the ball on atom
/// endpoints, or with one end on an endpoint and `ρ` at `rho_lo`, `rho_hi`,
/// or the radius where the two branches of the scale cross. On other spaces
/// the same candidates are searched without the exactness guarantee.
pub fn extremal_search(mu: &WeightedBallMeasure, rho_lo: f64, rho_hi: f64) -> (f64, Option<Ball>) {
    extremal_search_from(mu, rho_lo, rho_hi, (0.0, None))
}

fn candidate(mu: &WeightedBallMeasure, lo: f64, hi: f64) -> (f64, Option<Ball>) {
    let rho = 0.5 * (hi - lo);
    let ratio = mu.mass_between(lo, hi) / bound_scale(mu, rho);
    let ball = Ball {
        center: 0.5 * (lo + hi),
        radius: rho,
    };
    (ratio, Some(ball))
}

/// As [`extremal_search`], seeded with a known lower value for pruning.
pub fn extremal_search_from(mu: &WeightedBallMeasure, rho_lo: f64, rho_hi: f64, seed: (f64, Option<Ball>)) -> (f64, Option<Ball>) {
    let mut ends: Vec<f64> = mu.atoms.iter().flat_map(|a| [a.ball.lo(), a.ball.hi()]).collect();
    ends.sort_by(f64::total_cmp);

    let crossing = branch_crossing(mu, rho_lo, rho_hi);
    let radii: Vec<f64> = [Some(rho_lo), Some(rho_hi), crossing].into_iter().flatten().collect();
    let pinned = ends
        .par_iter()
        .map(|&e| {
            radii.iter().fold((0.0, None), |acc, &rho| {
                let acc = better(acc, candidate(mu, e, e + 2.0 * rho));
                better(acc, candidate(mu, e - 2.0 * rho, e))
            })
        })
        .reduce(|| (0.0, None), better);
    let best = better(seed, pinned);

    let cdf: Vec<f64> = ends.iter().map(|&e| mu.cdf(e)).collect();
    let pairs = best_pair(mu, &ends, &cdf, rho_lo, rho_hi, best.0);
    better(best, pairs)
}

#[derive(Clone, Copy, Debug)]
struct PairBox {
    bound: f64,
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl PartialEq for PairBox {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for PairBox {}

impl PartialOrd for PairBox {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PairBox {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then((other.i0, other.j0).cmp(&(self.i0, self.j0)))
    }
}

const LEAF_PAIRS: usize = 64;

/// Best-first branch and bound over boxes of endpoint index pairs
/// `(i, j)`, `i < j`. A box's bound uses the largest mass any of its pairs
/// can span over the smallest scale any of them can have; boxes are only
/// discarded when the bound is strictly below the best value, so ties are
/// all visited and resolved by [`better`].
fn best_pair(mu: &WeightedBallMeasure, ends: &[f64], cdf: &[f64], rho_lo: f64, rho_hi: f64, floor: f64) -> (f64, Option<Ball>) {
    let n = ends.len();
    let mut best: (f64, Option<Ball>) = (0.0, None);
    if n < 2 {
        return best;
    }
    let make = |i0: usize, i1: usize, j0: usize, j1: usize| -> Option<PairBox> {
        if j1 <= i0 {
            return None;
        }
        let max_span = ends[j1] - ends[i0];
        let min_span = (ends[j0] - ends[i1]).max(0.0);
        if max_span < 2.0 * rho_lo || min_span > 2.0 * rho_hi {
            return None;
        }
        let mass = cdf[j1] - cdf[i0];
        let bound = mass / bound_scale(mu, (0.5 * min_span).max(rho_lo));
        Some(PairBox { bound, i0, i1, j0, j1 })
    };
    let mut heap = std::collections::BinaryHeap::new();
    heap.extend(make(0, n - 1, 0, n - 1));
    while let Some(bx) = heap.pop() {
        if bx.bound < best.0.max(floor) {
            break;
        }
        let (ni, nj) = (bx.i1 - bx.i0 + 1, bx.j1 - bx.j0 + 1);
        if ni * nj <= LEAF_PAIRS {
            for i in bx.i0..=bx.i1 {
                for j in bx.j0.max(i + 1)..=bx.j1 {
                    let rho = 0.5 * (ends[j] - ends[i]);
                    if rho >= rho_lo && rho <= rho_hi {
                        best = better(best, candidate(mu, ends[i], ends[j]));
                    }
                }
            }
            continue;
        }
        if ni >= nj {
            let mid = bx.i0 + ni / 2;
            heap.extend(make(bx.i0, mid - 1, bx.j0, bx.j1));
            heap.extend(make(mid, bx.i1, bx.j0, bx.j1));
        } else {
            let mid = bx.j0 + nj / 2;
            heap.extend(make(bx.i0, bx.i1, bx.j0, mid - 1));
            heap.extend(make(bx.i0, bx.i1, mid, bx.j1));
        }
    }
    best
}

/// Radius in `[lo, hi]` where `(ρ/diam B₀)^δ = f(ρ)/C`, if any.
fn branch_crossing(mu: &WeightedBallMeasure, lo: f64, hi: f64) -> Option<f64> {
    let d = mu.parent.diam();
    let g = |r: f64| (r / d).powf(mu.delta) - mu.f.eval(r) / mu.c;
    let (mut a, mut b) = (lo, hi);
    if g(a).signum() == g(b).signum() {
        return None;
    }
    for _ in 0..200 {
        let m = (a * b).sqrt();
        if g(m).signum() == g(a).signum() {
            a = m;
        } else {
            b = m;
        }
        if b / a - 1.0 < 1e-14 {
            break;
        }
    }
    Some(a)
}

/// Exhaustive reference for small measures: the same candidate set
/// without pruning.
pub fn extremal_search_brute(mu: &WeightedBallMeasure, rho_lo: f64, rho_hi: f64) -> f64 {
    let ends: Vec<f64> = mu.atoms.iter().flat_map(|a| [a.ball.lo(), a.ball.hi()]).collect();
    let mut best: f64 = 0.0;
    for &e1 in &ends {
        for &e2 in &ends {
            let rho = 0.5 * (e2 - e1);
            if rho >= rho_lo && rho <= rho_hi {
                best = best.max(mu.mass_between(e1, e2) / bound_scale(mu, rho));
            }
        }
        for rho in [Some(rho_lo), Some(rho_hi), branch_crossing(mu, rho_lo, rho_hi)]
            .into_iter()
            .flatten()
        {
            best = best.max(mu.mass_between(e1, e1 + 2.0 * rho) / bound_scale(mu, rho));
            best = best.max(mu.mass_between(e1 - 2.0 * rho, e1) / bound_scale(mu, rho));
        }
    }
    best
}

/// Interval hull of the atoms.
pub fn atom_hull(mu: &WeightedBallMeasure) -> Option<Interval> {
    mu.support().hull()
}
