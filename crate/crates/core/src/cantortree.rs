//! Recursive Cantor-type construction of a measure supported on the limsup
//! set, and the mass distribution bound read off from it.

use std::fmt::Write as _;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::{greedy_select, SelectionStatus};
use crate::dimfn::{check_dimension_function, DimensionFunction, MAX_RANGE};
use crate::geometry::{maximal_separated_net, separated_net_size, AhlforsSpace, Ball, GeometryError, RegionUnion};
use crate::localmeasure::{effective_cutoff, LocalMeasureError, WeightedBallMeasure};
use crate::rng::stream_rng;
use crate::sequences::{BallIndex, IndexedBall};

/// Upper limit on the number of nodes in one level.
pub const MAX_LEVEL_NODES: usize = 200_000;
const RHO_REL_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("support touches boundary")]
    SupportTouchesBoundary,
    #[error("no radius satisfies (rho/diam)^delta <= f(rho)/C")]
    NoFeasibleRadius,
    #[error("net at separation {sep:e} has more than {cap} points")]
    NetTooLarge { sep: f64, cap: usize },
    #[error("level {level} would have {count} nodes, above the limit of {cap}")]
    LevelTooLarge { level: usize, count: usize, cap: usize },
    #[error("depth must be at least 1")]
    BadDepth,
    #[error(transparent)]
    Measure(#[from] LocalMeasureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("node {word}: {source}")]
    AtNode { word: String, source: Box<TreeError> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub f: DimensionFunction,
    pub delta: f64,
    pub c: f64,
}

/// One node of the arena.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Position among the parent's children.
    pub position: usize,
    pub level: usize,
    pub ball: Ball,
    pub mass: f64,
    /// Set once the node's children are built.
    pub expansion: Option<Expansion>,
    pub children: Range<usize>,
}

/// What was computed when a node was expanded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub rho: f64,
    /// Distance from the support of the local measure to the complement of
    /// the tail region.
    pub clearance: f64,
    /// Index cutoff used for the tail.
    pub cutoff: usize,
    /// Cutoff after the adjustment that makes atoms sit inside their
    /// rescaled balls.
    pub cutoff_effective: usize,
    pub atoms: usize,
    /// Atoms were shrunk to half radius to clear the boundary.
    pub shrunk: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub nodes: usize,
    pub mass: f64,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub branching_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorTree {
    pub nodes: Vec<TreeNode>,
    /// Node index ranges per level; level 0 is the root.
    pub levels: Vec<Range<usize>>,
    pub params: TreeParams,
    pub space: AhlforsSpace,
    #[serde(skip)]
    leaf_prefix: Vec<f64>,
}

/// The tail cutoff used at a node of the given level (indices are 1-based).
pub fn level_cutoff(level: usize) -> usize {
    level + 1
}

/// Largest `ρ` with `(ρ/diam)^δ ≤ f(ρ)/C`, to relative tolerance `1e-12`,
/// returned from the feasible side. Capped at `diam`.
pub fn rho_star(diam: f64, f: &DimensionFunction, delta: f64, c: f64) -> Result<f64, TreeError> {
    // h > 0 exactly on the feasible side; decreasing in ρ.
    let h = |rho: f64| f.eval(rho).ln() - c.ln() - delta * (rho / diam).ln();
    let mut lo = crate::dimfn::GRID_FLOOR;
    let mut hi = diam;
    if h(hi) >= 0.0 {
        return Ok(hi);
    }
    let at_floor = h(lo);
    if at_floor.is_nan() || at_floor < 0.0 {
        return Err(TreeError::NoFeasibleRadius);
    }
    while hi / lo - 1.0 > RHO_REL_TOL {
        let mid = (lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `ρ_ω = min(d/2, ρ*)` for a support at distance `clearance` from the
/// complement of the tail region.
pub fn choose_rho_from(clearance: f64, diam: f64, f: &DimensionFunction, delta: f64, c: f64) -> Result<f64, TreeError> {
    if clearance.is_nan() || clearance <= 0.0 {
        return Err(TreeError::SupportTouchesBoundary);
    }
    Ok((0.5 * clearance).min(rho_star(diam, f, delta, c)?))
}

/// `ρ_ω` for the local measure `mu` on `b_omega` and the open `tail_region`.
pub fn choose_rho(
    mu: &WeightedBallMeasure,
    b_omega: &Ball,
    tail_region: &RegionUnion,
    f: &DimensionFunction,
    delta: f64,
    c: f64,
) -> Result<f64, TreeError> {
    let clear = mu.space.distance_to_complement(&mu.support(), tail_region);
    choose_rho_from(clear.distance, b_omega.diam(), f, delta, c)
}

/// The open set `⋃_{i ≥ n} B_i ∩ B_ω`.
pub fn tail_region(index: &BallIndex, b_omega: &Ball, n: usize) -> RegionUnion {
    let hits = index.intersecting(b_omega, n);
    RegionUnion::from_balls(hits.iter().map(|b| &b.ball)).intersect_interval(b_omega.interval())
}

/// Children of one node: `(center, mass fraction)` pairs and the expansion
/// record.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelOutput {
    pub children: Vec<(f64, f64)>,
    pub expansion: Expansion,
}

/// Builds the children of a node at `level` with ball `b_omega`.
pub fn build_level(
    space: &AhlforsSpace,
    index: &BallIndex,
    params: &TreeParams,
    level: usize,
    b_omega: &Ball,
    cutoff_effective: usize,
    net_cap: usize,
) -> Result<LevelOutput, TreeError> {
    let TreeParams { f, delta, c } = *params;
    let cutoff = level_cutoff(level);
    let candidates: Vec<IndexedBall> = index
        .centers_in(b_omega.interval())
        .iter()
        .filter(|b| b.index >= cutoff_effective)
        .copied()
        .collect();
    let selection = greedy_select(space, &candidates, &f, delta, c, b_omega, cutoff_effective);
    if let SelectionStatus::Partial { fraction } = selection.status {
        return Err(LocalMeasureError::Partial {
            fraction,
            n_effective: cutoff_effective,
        }
        .into());
    }
    let mut mu = WeightedBallMeasure::from_selection(space, &selection, &f, delta, c, b_omega, cutoff, cutoff_effective)?;

    let tail = tail_region(index, b_omega, cutoff);
    let mut clear = space.distance_to_complement(&mu.support(), &tail);
    let mut shrunk = false;
    if clear.touches_boundary {
        mu = mu.shrink_atoms(0.5)?;
        clear = space.distance_to_complement(&mu.support(), &tail);
        shrunk = true;
    }
    let rho = choose_rho_from(clear.distance, b_omega.diam(), &f, delta, c)?;

    let support = mu.support();
    let sep = 4.0 * rho;
    if separated_net_size(space, &support, sep, net_cap) > net_cap {
        return Err(TreeError::NetTooLarge { sep, cap: net_cap });
    }
    let net = maximal_separated_net(space, &support, sep)?;
    let mut children = Vec::with_capacity(net.len());
    let mut below = 0.0;
    for (a, &x) in net.iter().enumerate() {
        let upto = match net.get(a + 1) {
            Some(&next) => mu.cdf(0.5 * (x + next)),
            None => 1.0,
        };
        children.push((x, upto - below));
        below = upto;
    }
    Ok(LevelOutput {
        children,
        expansion: Expansion {
            rho,
            clearance: clear.distance,
            cutoff,
            cutoff_effective,
            atoms: mu.len(),
            shrunk,
        },
    })
}

/// A tree together with the error that stopped its construction, if any.
#[derive(Debug)]
pub struct TreeBuild {
    pub tree: CantorTree,
    pub error: Option<TreeError>,
}

impl TreeBuild {
    pub fn into_result(self) -> Result<CantorTree, TreeError> {
        match self.error {
            None => Ok(self.tree),
            Some(e) => Err(e),
        }
    }
}

/// Expands level by level up to `depth`. On failure the levels built so
/// far are kept and the error names the first failing node.
pub fn build_tree(space: &AhlforsSpace, balls: &[IndexedBall], params: &TreeParams, depth: usize, root: &Ball) -> TreeBuild {
    let mut tree = CantorTree {
        nodes: vec![TreeNode {
            parent: None,
            position: 0,
            level: 0,
            ball: *root,
            mass: 1.0,
            expansion: None,
            children: 0..0,
        }],
        levels: std::iter::once(0..1).collect(),
        params: *params,
        space: *space,
        leaf_prefix: Vec::new(),
    };
    if depth == 0 {
        tree.finish();
        return TreeBuild {
            tree,
            error: Some(TreeError::BadDepth),
        };
    }
    let index = BallIndex::new(balls);
    let mut error = None;
    for level in 0..depth {
        let range = tree.levels[level].clone();
        let cutoff = level_cutoff(level);
        let Some(cutoff_effective) = effective_cutoff(balls, &params.f, params.delta, params.c, cutoff) else {
            error = Some(LocalMeasureError::RadiiTooLarge { c: params.c }.into());
            break;
        };
        let outputs: Vec<Result<LevelOutput, TreeError>> = tree.nodes[range.clone()]
            .par_iter()
            .map(|node| build_level(space, &index, params, level, &node.ball, cutoff_effective, MAX_LEVEL_NODES))
            .collect();
        if let Some((k, e)) = outputs
            .iter()
            .enumerate()
            .find_map(|(k, r)| r.as_ref().err().map(|e| (k, e.clone())))
        {
            error = Some(TreeError::AtNode {
                word: tree.word(range.start + k),
                source: Box::new(e),
            });
            break;
        }
        let count: usize = outputs.iter().map(|r| r.as_ref().map_or(0, |o| o.children.len())).sum();
        if count > MAX_LEVEL_NODES {
            error = Some(TreeError::LevelTooLarge {
                level: level + 1,
                count,
                cap: MAX_LEVEL_NODES,
            });
            break;
        }
        let start = tree.nodes.len();
        for (k, out) in outputs.into_iter().enumerate() {
            let out = out.expect("errors handled above");
            let parent = range.start + k;
            let first = tree.nodes.len();
            let (pmass, rho) = (tree.nodes[parent].mass, out.expansion.rho);
            for (position, (x, frac)) in out.children.into_iter().enumerate() {
                tree.nodes.push(TreeNode {
                    parent: Some(parent),
                    position,
                    level: level + 1,
                    ball: Ball { center: x, radius: rho },
                    mass: pmass * frac,
                    expansion: None,
                    children: 0..0,
                });
            }
            let end = tree.nodes.len();
            let node = &mut tree.nodes[parent];
            node.children = first..end;
            node.expansion = Some(out.expansion);
        }
        tree.levels.push(start..tree.nodes.len());
    }
    tree.finish();
    TreeBuild { tree, error }
}

impl CantorTree {
    fn finish(&mut self) {
        let mut acc = 0.0;
        self.leaf_prefix = std::iter::once(0.0)
            .chain(self.leaves().iter().map(|n| {
                acc += n.mass;
                acc
            }))
            .collect();
    }

    /// Number of completed levels below the root.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn level(&self, n: usize) -> &[TreeNode] {
        &self.nodes[self.levels[n].clone()]
    }

    /// Nodes of the deepest level, in left-to-right order.
    pub fn leaves(&self) -> &[TreeNode] {
        self.level(self.depth())
    }

    /// Dot-separated child positions from the root; the root is `root`.
    pub fn word(&self, mut k: usize) -> String {
        let mut parts = Vec::new();
        while let Some(p) = self.nodes[k].parent {
            parts.push(self.nodes[k].position.to_string());
            k = p;
        }
        if parts.is_empty() {
            return "root".to_string();
        }
        parts.reverse();
        parts.join(".")
    }

    pub fn level_stats(&self) -> Vec<LevelStats> {
        (0..self.levels.len())
            .map(|n| {
                let nodes = self.level(n);
                let rhos: Vec<f64> = nodes.iter().filter_map(|x| x.expansion.as_ref().map(|e| e.rho)).collect();
                LevelStats {
                    level: n,
                    nodes: nodes.len(),
                    mass: nodes.iter().map(|x| x.mass).sum(),
                    rho_min: rhos.iter().copied().reduce(f64::min),
                    rho_max: rhos.iter().copied().reduce(f64::max),
                    branching_max: nodes.iter().map(|x| x.children.len()).max().unwrap_or(0),
                }
            })
            .collect()
    }

    /// Largest `|Σ_a p_{ωa} − p_ω|` over expanded nodes.
    pub fn mass_conservation_error(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.expansion.is_some())
            .map(|n| {
                let sum: f64 = self.nodes[n.children.clone()].iter().map(|c| c.mass).sum();
                (sum - n.mass).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Children of every node have centers `4ρ_ω` apart, hence gaps of at
    /// least `2ρ_ω`, and lie inside their parent.
    pub fn children_separated(&self) -> bool {
        self.nodes.iter().all(|n| {
            let Some(e) = &n.expansion else {
                return true;
            };
            let kids = &self.nodes[n.children.clone()];
            kids.windows(2)
                .all(|w| w[1].ball.center - w[0].ball.center >= 4.0 * e.rho && w[0].ball.hi() <= w[1].ball.lo())
                && kids.iter().all(|k| k.ball.is_inside(&n.ball))
        })
    }

    /// Both clauses of the radius rule: `ρ_ω` is below the clearance and
    /// `(ρ_ω / diam B_ω)^δ ≤ f(ρ_ω)/C`.
    pub fn rho_feasible(&self) -> bool {
        let TreeParams { f, delta, c } = self.params;
        self.nodes.iter().all(|n| {
            n.expansion
                .as_ref()
                .is_none_or(|e| e.rho > 0.0 && e.rho < e.clearance && (e.rho / n.ball.diam()).powf(delta) <= f.eval(e.rho) / c)
        })
    }

    /// Every child lies in `⋃_{i ≥ N} B_i ∩ B_parent`, where `N` is the
    /// parent's tail cutoff.
    pub fn children_in_tail(&self, balls: &[IndexedBall]) -> bool {
        let index = BallIndex::new(balls);
        self.nodes.par_iter().all(|n| {
            let Some(e) = &n.expansion else {
                return true;
            };
            let tail = tail_region(&index, &n.ball, e.cutoff);
            self.nodes[n.children.clone()].iter().all(|k| {
                k.ball.is_inside(&n.ball)
                    && tail
                        .component_containing(k.ball.interval())
                        .is_some_and(|comp| comp.lo <= k.ball.lo() && k.ball.hi() <= comp.hi)
            })
        })
    }

    /// Brackets `[lower, upper]` for the limit measure of the open ball `b`.
    pub fn query(&self, b: &Ball) -> (f64, f64) {
        let leaves = self.leaves();
        let a = leaves.partition_point(|n| n.ball.hi() <= b.lo());
        let z = leaves.partition_point(|n| n.ball.lo() < b.hi()).max(a);
        if a == z {
            return (0.0, 0.0);
        }
        let upper = self.leaf_prefix[z] - self.leaf_prefix[a];
        // Only the end leaves of the meeting range can poke out.
        let mut lower = upper;
        if !leaves[a].ball.is_inside(b) {
            lower -= leaves[a].mass;
        }
        if z - 1 > a && !leaves[z - 1].ball.is_inside(b) {
            lower -= leaves[z - 1].mass;
        }
        (lower.max(0.0), upper.min(1.0))
    }

    /// Plain-text dump: one line per node.
    pub fn dump(&self) -> String {
        let mut out = String::from("# word\tlevel\tcenter\tradius\tmass\trho\tchildren\n");
        for k in 0..self.nodes.len() {
            let n = &self.nodes[k];
            let rho = n.expansion.as_ref().map_or("-".to_string(), |e| format!("{:e}", e.rho));
            let _ = writeln!(
                out,
                "{}\t{}\t{:e}\t{:e}\t{:e}\t{}\t{}",
                self.word(k),
                n.level,
                n.ball.center,
                n.ball.radius,
                n.mass,
                rho,
                n.children.len()
            );
        }
        out
    }
}

/// `μ(B)` brackets from the deepest level.
pub fn query_tree(tree: &CantorTree, b: &Ball) -> (f64, f64) {
    tree.query(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBound {
    pub c_hat: f64,
    pub lower_bound: f64,
    pub worst_ball: Option<Ball>,
    pub samples: u64,
    pub rho_range: (f64, f64),
}

/// Largest upper-bracket `μ(B)/f(ρ)` over sampled balls with `ρ` between
/// the leaf radius and the root's `ρ`, plus balls at leaf centers whose
/// radii sit on each ancestor's `ρ_τ`. The mass distribution principle
/// then gives `H^f ≥ 1/c_hat`.
pub fn mass_distribution_bound(tree: &CantorTree, f: &DimensionFunction, n_samples: u64, seed: u64) -> MassBound {
    let leaves = tree.leaves();
    let rho_hi = tree.root().expansion.as_ref().map_or(tree.root().ball.radius, |e| e.rho);
    let rho_lo = leaves.iter().map(|n| n.ball.radius).fold(f64::INFINITY, f64::min).min(rho_hi);
    let ratio = |b: &Ball| tree.query(b).1 / f.eval(b.radius);
    let pick = |acc: (f64, Option<Ball>), cand: (f64, Option<Ball>)| match acc.0.total_cmp(&cand.0) {
        std::cmp::Ordering::Less => cand,
        std::cmp::Ordering::Greater => acc,
        std::cmp::Ordering::Equal => {
            let key = |x: &Option<Ball>| x.map_or((f64::INFINITY, 0.0), |b| (b.center, b.radius));
            if key(&acc.1) <= key(&cand.1) {
                acc
            } else {
                cand
            }
        }
    };

    const CHUNK: u64 = 1024;
    let root = tree.root().ball;
    let sampled = (0..n_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, chunk + 1);
            let mut best = (0.0, None);
            for j in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_samples) {
                let x = if j % 2 == 0 {
                    leaves[rng.random_range(0..leaves.len())].ball.center
                } else {
                    root.lo() + root.diam() * rng.random::<f64>()
                };
                let rho = (rho_lo.ln() + (rho_hi.ln() - rho_lo.ln()) * rng.random::<f64>()).exp();
                let b = Ball { center: x, radius: rho };
                best = pick(best, (ratio(&b), Some(b)));
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, None), pick);

    // Threshold families at a deterministic spread of leaves.
    let stride = (leaves.len() / 4096).max(1);
    let thresholds = leaves
        .par_iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0)
        .map(|(k, leaf)| {
            let mut best = (0.0, None);
            let mut node = tree.levels[tree.depth()].start + k;
            while let Some(p) = tree.nodes[node].parent {
                let rho_tau = tree.nodes[p].expansion.as_ref().map_or(0.0, |e| e.rho);
                for r in [rho_tau, rho_tau * (1.0 + 1e-9), 2.0 * rho_tau, 4.0 * rho_tau] {
                    if r >= rho_lo && r <= rho_hi {
                        let b = Ball {
                            center: leaf.ball.center,
                            radius: r,
                        };
                        best = pick(best, (ratio(&b), Some(b)));
                    }
                }
                node = p;
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, None), pick);

    let (c_hat, worst_ball) = pick(sampled, thresholds);
    MassBound {
        c_hat,
        lower_bound: if c_hat > 0.0 { 1.0 / c_hat } else { f64::INFINITY },
        worst_ball,
        samples: n_samples,
        rho_range: (rho_lo, rho_hi),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub c: f64,
    pub depth: usize,
    pub ceiling: f64,
    pub samples: u64,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectStep {
    pub s: f64,
    pub positive: bool,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectResult {
    pub s_star: f64,
    pub bracket: (f64, f64),
    pub steps: Vec<BisectStep>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BisectError {
    #[error("bracket [{lo}, {hi}] does not straddle the transition (positive at lo: {lo_ok}, at hi: {hi_ok})")]
    BadBracket { lo: f64, hi: f64, lo_ok: bool, hi_ok: bool },
    #[error("tolerance must be positive")]
    BadTolerance,
}

/// Whether the pipeline certifies positive `H^s` measure at exponent `s`:
/// `r^s` passes the validity checks, the tree builds to the requested depth,
/// and `c_hat` stays below the ceiling.
pub fn positive_at(space: &AhlforsSpace, balls: &[IndexedBall], root: &Ball, s: f64, opts: &BisectOptions) -> BisectStep {
    let step = |positive, reason: String| BisectStep { s, positive, reason };
    let delta = space.delta();
    let Ok(f) = DimensionFunction::power(s) else {
        return step(false, "bad exponent".into());
    };
    match check_dimension_function(&f, delta, MAX_RANGE) {
        Ok(v) if v.is_valid() => {}
        Ok(_) => return step(false, "r^s fails the validity conditions".into()),
        Err(e) => return step(false, e.to_string()),
    }
    let params = TreeParams { f, delta, c: opts.c };
    let tree = match build_tree(space, balls, &params, opts.depth, root).into_result() {
        Ok(t) => t,
        Err(e) => return step(false, e.to_string()),
    };
    let bound = mass_distribution_bound(&tree, &f, opts.samples, opts.seed);
    if bound.c_hat <= opts.ceiling {
        step(true, format!("c_hat {:.6e}", bound.c_hat))
    } else {
        step(false, format!("c_hat {:.6e} above ceiling", bound.c_hat))
    }
}

/// Bisection on `s` between a positive `lo` and a non-positive `hi`.
pub fn dimension_bisect(
    space: &AhlforsSpace,
    balls: &[IndexedBall],
    root: &Ball,
    s_range: (f64, f64),
    opts: &BisectOptions,
) -> Result<BisectResult, BisectError> {
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(BisectError::BadTolerance);
    }
    let (mut lo, mut hi) = s_range;
    let a = positive_at(space, balls, root, lo, opts);
    let b = positive_at(space, balls, root, hi, opts);
    if !a.positive || b.positive {
        return Err(BisectError::BadBracket {
            lo,
            hi,
            lo_ok: a.positive,
            hi_ok: b.positive,
        });
    }
    let mut steps = vec![a, b];
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        let st = positive_at(space, balls, root, mid, opts);
        if st.positive {
            lo = mid;
        } else {
            hi = mid;
        }
        steps.push(st);
    }
    Ok(BisectResult {
        s_star: 0.5 * (lo + hi),
        bracket: s_range,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{indexed, BallSequence};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn ball(c: f64, r: f64) -> Ball {
        Ball::new(c, r).unwrap()
    }

    #[test]
    fn rho_examples() {
        let f = DimensionFunction::power(0.5).unwrap();
        let r = choose_rho_from(10.0, 0.2, &f, 1.0, 1.0).unwrap();
        assert_relative_eq!(r, 0.04, max_relative = 1e-11);
        assert!((r / 0.2) <= f.eval(r));
        assert_eq!(choose_rho_from(0.01, 0.2, &f, 1.0, 1.0).unwrap(), 0.005);
        assert_eq!(choose_rho_from(0.0, 0.2, &f, 1.0, 1.0), Err(TreeError::SupportTouchesBoundary));
        let flat = DimensionFunction::power(1.0).unwrap();
        assert_eq!(rho_star(1.0, &flat, 1.0, 2.0), Err(TreeError::NoFeasibleRadius));
    }

    #[test]
    fn single_ball_sequence_collapses_to_a_chain() {
        // One ball whose rescaled version is most of B₀, and the full line
        // as tail at every level.
        let x = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(0.5).unwrap();
        let params = TreeParams { f, delta: 1.0, c: 1.0 };
        let balls = indexed(&[ball(0.5, 2.0), ball(0.5, 2.0), ball(0.5, 0.2), ball(0.5, 0.2), ball(0.5, 0.01)]);
        let build = build_tree(&x, &balls, &params, 1, &ball(0.5, 0.5));
        let tree = build.into_result().unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.leaves().len(), 1);
        assert_eq!(tree.leaves()[0].mass, 1.0);
        assert_eq!(tree.query(&ball(0.5, 10.0)), (1.0, 1.0));
        assert_eq!(tree.query(&ball(5.0, 0.1)), (0.0, 0.0));
    }

    #[test]
    fn two_far_atoms_split_mass_evenly() {
        let x = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(0.5).unwrap();
        let params = TreeParams { f, delta: 1.0, c: 1.0 };
        // Rescaled radius sqrt(0.04) = 0.2 each; the cover ball keeps the
        // tail region equal to B₀.
        let balls = indexed(&[ball(0.5, 3.0), ball(0.25, 0.04), ball(0.75, 0.04)]);
        let tree = build_tree(&x, &balls, &params, 1, &ball(0.5, 0.5)).into_result().unwrap();
        let masses: Vec<f64> = tree.leaves().iter().map(|n| n.mass).collect();
        assert_eq!(masses.len(), 2);
        assert_abs_diff_eq!(masses[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(masses[1], 0.5, epsilon = 1e-12);
        assert!(tree.children_separated());
        assert!(tree.rho_feasible());
        assert!(tree.children_in_tail(&balls));
        let leaf = &tree.leaves()[0];
        let (lo, hi) = tree.query(&leaf.ball);
        assert!(lo <= leaf.mass && leaf.mass <= hi);
    }

    #[test]
    fn depth_zero_is_rejected() {
        let x = AhlforsSpace::unit_interval();
        let params = TreeParams {
            f: DimensionFunction::power(0.5).unwrap(),
            delta: 1.0,
            c: 1.0,
        };
        let build = build_tree(&x, &indexed(&[ball(0.5, 0.1)]), &params, 0, &ball(0.5, 0.5));
        assert_eq!(build.error, Some(TreeError::BadDepth));
    }

    #[test]
    fn mdp_on_a_trivial_tree() {
        let x = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(0.5).unwrap();
        let params = TreeParams { f, delta: 1.0, c: 1.0 };
        let balls = indexed(&[ball(0.5, 2.0), ball(0.5, 2.0), ball(0.5, 0.2), ball(0.5, 0.2), ball(0.5, 0.01)]);
        let tree = build_tree(&x, &balls, &params, 1, &ball(0.5, 0.5)).into_result().unwrap();
        let bound = mass_distribution_bound(&tree, &f, 200, 3);
        let rho = tree.root().expansion.as_ref().unwrap().rho;
        assert_relative_eq!(bound.c_hat, 1.0 / f.eval(rho), max_relative = 1e-12);
        assert_relative_eq!(bound.lower_bound, f.eval(rho), max_relative = 1e-12);
    }

    #[test]
    fn rational_tree_c1_depth3() {
        let x = AhlforsSpace::unit_interval();
        let seq = BallSequence::rational(3.0).unwrap();
        let balls = indexed(&seq.generate(&x, BallSequence::rational_count(100)).unwrap());
        let params = TreeParams {
            f: DimensionFunction::power(2.0 / 3.0).unwrap(),
            delta: 1.0,
            c: 1.0,
        };
        let tree = build_tree(&x, &balls, &params, 3, &ball(0.5, 0.5)).into_result().unwrap();
        assert!(tree.mass_conservation_error() <= 1e-12);
        for st in tree.level_stats() {
            assert_abs_diff_eq!(st.mass, 1.0, epsilon = 1e-9);
        }
        assert!(tree.children_separated());
        assert!(tree.rho_feasible());
        assert!(tree.children_in_tail(&balls));
        assert!(tree.dump().lines().count() == tree.nodes.len() + 1);
    }
}
