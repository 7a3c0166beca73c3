//! Greedy selection of pairwise disjoint rescaled balls inside a target ball.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dimfn::DimensionFunction;
use crate::geometry::{AhlforsSpace, Ball, RegionUnion};
use crate::sequences::IndexedBall;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    /// The rescaled ball is not contained in `B₀`.
    OutsideTarget,
    /// The original ball carries no measure of the space.
    NullBall,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum StepOutcome {
    Accepted,
    Rejected { blocker: usize },
    Dropped { reason: DropReason },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub radius: f64,
    pub outcome: StepOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SelectionStatus {
    Success,
    /// Input ran out with only this fraction of `H(B₀)` captured.
    Partial {
        fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected original balls, in acceptance order.
    pub selected: Vec<IndexedBall>,
    /// Their rescaled versions `B_i^{f/C}`, same order.
    pub rescaled: Vec<Ball>,
    pub captured: f64,
    pub target: f64,
    /// `H(B₀)`.
    pub total: f64,
    pub status: SelectionStatus,
    /// Balls skipped because their index is below the cutoff.
    pub below_cutoff: usize,
    pub trace: Vec<TraceStep>,
}

impl SelectionResult {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|b| b.index).collect()
    }

    pub fn fraction(&self) -> f64 {
        self.captured / self.total
    }

    pub fn is_success(&self) -> bool {
        self.status == SelectionStatus::Success
    }
}

#[derive(Clone, Copy, Debug)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Accepts balls in order of non-increasing radius (ties by index) whenever
/// the rescaled ball lies in `b0` and misses every rescaled ball accepted so
/// far. Stops once half of `H(b0)` is covered.
pub fn greedy_select(
    space: &AhlforsSpace,
    balls: &[IndexedBall],
    f: &DimensionFunction,
    delta: f64,
    c: f64,
    b0: &Ball,
    n: usize,
) -> SelectionResult {
    let total = space.ball_measure(b0);
    let target = 0.5 * total;

    let mut order: Vec<&IndexedBall> = balls.iter().filter(|b| b.index >= n).collect();
    let below_cutoff = balls.len() - order.len();
    order.sort_by(|a, b| b.ball.radius.total_cmp(&a.ball.radius).then(a.index.cmp(&b.index)));

    // Accepted rescaled balls keyed by left end: (right end, index).
    let mut accepted: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    let mut selected = Vec::new();
    let mut rescaled = Vec::new();
    let mut trace = Vec::new();
    let mut captured = 0.0;

    for ib in order {
        if captured >= target {
            break;
        }
        let r = f.scaled_radius(ib.ball.radius, delta, c);
        let scaled = ib.ball.with_radius(r);
        let dropped = if !scaled.is_inside(b0) {
            Some(DropReason::OutsideTarget)
        } else if space.ball_measure(&ib.ball) <= 0.0 {
            Some(DropReason::NullBall)
        } else {
            None
        };
        if let Some(reason) = dropped {
            trace.push(TraceStep {
                index: ib.index,
                radius: ib.ball.radius,
                outcome: StepOutcome::Dropped { reason },
            });
            continue;
        }
        // The accepted set is disjoint and sorted, so only the rightmost
        // interval starting before `scaled.hi()` can overlap.
        let blocker = accepted
            .range(..Key(scaled.hi()))
            .next_back()
            .filter(|(_, &(hi, _))| hi > scaled.lo())
            .map(|(_, &(_, index))| index);
        let outcome = match blocker {
            Some(blocker) => StepOutcome::Rejected { blocker },
            None => {
                accepted.insert(Key(scaled.lo()), (scaled.hi(), ib.index));
                captured += space.ball_measure(&scaled);
                selected.push(*ib);
                rescaled.push(scaled);
                StepOutcome::Accepted
            }
        };
        trace.push(TraceStep {
            index: ib.index,
            radius: ib.ball.radius,
            outcome,
        });
    }

    let status = if captured >= target {
        SelectionStatus::Success
    } else {
        SelectionStatus::Partial {
            fraction: captured / total,
        }
    };
    SelectionResult {
        selected,
        rescaled,
        captured,
        target,
        total,
        status,
        below_cutoff,
        trace,
    }
}

/// Exact recomputation of the captured measure through the union.
pub fn captured_by_union(space: &AhlforsSpace, result: &SelectionResult) -> f64 {
    space.region_measure(&RegionUnion::from_balls(&result.rescaled))
}

/// Whether the rescaled balls are pairwise disjoint (open) and inside `b0`.
pub fn selection_is_sound(result: &SelectionResult, b0: &Ball) -> bool {
    let mut parts: Vec<Ball> = result.rescaled.clone();
    parts.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    parts.iter().all(|b| b.is_inside(b0)) && parts.windows(2).all(|w| w[0].hi() <= w[1].lo())
}

/// Smallest `η` with `B_j^f ⊂ η B_i^f` for blocker `i` and rejected `j`.
pub fn dilation_needed(blocker: &Ball, rejected: &Ball, f: &DimensionFunction, delta: f64) -> f64 {
    let ri = f.scaled_radius(blocker.radius, delta, 1.0);
    let rj = f.scaled_radius(rejected.radius, delta, 1.0);
    (rj + (blocker.center - rejected.center).abs()) / ri
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilationReport {
    pub eta: f64,
    pub checked: usize,
    pub worst: f64,
    /// `(rejected, blocker, needed)` for every rejection needing more than `η`.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Checks every rejection in the trace against `η = 5λ^δ`.
pub fn dilation_bound_check(
    result: &SelectionResult,
    balls: &[IndexedBall],
    f: &DimensionFunction,
    delta: f64,
    lambda: f64,
) -> DilationReport {
    let eta = 5.0 * lambda.powf(delta);
    let by_index: std::collections::HashMap<usize, Ball> = balls.iter().map(|b| (b.index, b.ball)).collect();
    let mut report = DilationReport {
        eta,
        checked: 0,
        worst: 0.0,
        violations: Vec::new(),
    };
    for step in &result.trace {
        let StepOutcome::Rejected { blocker } = step.outcome else {
            continue;
        };
        let (Some(bi), Some(bj)) = (by_index.get(&blocker), by_index.get(&step.index)) else {
            continue;
        };
        let needed = dilation_needed(bi, bj, f, delta);
        report.checked += 1;
        report.worst = report.worst.max(needed);
        if needed > eta {
            report.violations.push((step.index, blocker, needed));
        }
    }
    report
}
