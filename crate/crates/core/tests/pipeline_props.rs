use limsup_core::cantortree::{build_tree, TreeParams};
use limsup_core::covering::{captured_by_union, greedy_select, selection_is_sound, StepOutcome};
use limsup_core::geometry::{AhlforsSpace, Ball, Interval, RegionUnion};
use limsup_core::localmeasure::{build_local_measure, query_local, query_region, verify_star_hypothesis};
use limsup_core::oracle::cells_meeting;
use limsup_core::rng::stream_rng;
use limsup_core::sequences::{indexed, restrict_to, BallSequence, IndexedBall};
use limsup_core::DimensionFunction;
use proptest::prelude::*;
use rand::Rng;

fn b0() -> Ball {
    Ball::new(0.5, 0.5).unwrap()
}

fn rational_balls(tau: f64, q_max: usize) -> Vec<IndexedBall> {
    let space = AhlforsSpace::unit_interval();
    let raw = BallSequence::rational(tau)
        .unwrap()
        .generate(&space, BallSequence::rational_count(q_max))
        .unwrap();
    restrict_to(&raw, 1, &b0()).unwrap()
}

fn balls_strategy() -> impl Strategy<Value = Vec<Ball>> {
    prop::collection::vec((0.0f64..1.0, 1e-4f64..0.05), 1..200).prop_map(|v| v.into_iter().map(|(c, r)| Ball::new(c, r).unwrap()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_is_disjoint_contained_and_accounted(balls in balls_strategy(), s in 0.3f64..1.0, c in 1.0f64..20.0, n in 1usize..20) {
        let space = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(s).unwrap();
        let ib = indexed(&balls);
        let res = greedy_select(&space, &ib, &f, 1.0, c, &b0(), n);
        prop_assert!(selection_is_sound(&res, &b0()));
        prop_assert!((captured_by_union(&space, &res) - res.captured).abs() <= 1e-12);
        prop_assert_eq!(res.below_cutoff, ib.iter().filter(|b| b.index < n).count());
        let accepted = res.trace.iter().filter(|t| t.outcome == StepOutcome::Accepted).count();
        prop_assert_eq!(accepted, res.selected.len());
        prop_assert_eq!(res.is_success(), res.captured >= 0.5 * res.total);
        // Radii are visited in non-increasing order.
        prop_assert!(res.trace.windows(2).all(|w| w[0].radius >= w[1].radius));
    }

    #[test]
    fn longer_truncation_never_captures_less(q1 in 5usize..150, extra in 1usize..150, c in prop::sample::select(vec![1.0, 10.0, 100.0]), n in 1usize..500) {
        let space = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(2.0 / 3.0).unwrap();
        let short = greedy_select(&space, &rational_balls(3.0, q1), &f, 1.0, c, &b0(), n);
        let long = greedy_select(&space, &rational_balls(3.0, q1 + extra), &f, 1.0, c, &b0(), n);
        prop_assert!(long.captured >= short.captured, "{} < {}", long.captured, short.captured);
    }

    #[test]
    fn local_measure_is_a_probability_and_additive(balls in balls_strategy(), s in 0.3f64..0.9, seed in any::<u64>()) {
        let space = AhlforsSpace::unit_interval();
        let f = DimensionFunction::power(s).unwrap();
        let Ok(mu) = build_local_measure(&space, &indexed(&balls), &f, 1.0, 1.0, &b0(), 1) else {
            return Ok(());
        };
        prop_assert!((query_local(&mu, &Ball::new(0.5, 1.0).unwrap()) - 1.0).abs() <= 1e-12);
        let mut rng = stream_rng(seed, 0);
        for _ in 0..50 {
            let x: f64 = rng.random();
            let (r1, r2, gap) = (0.2 * rng.random::<f64>() + 1e-6, 0.2 * rng.random::<f64>() + 1e-6, 0.1 * rng.random::<f64>());
            let a = Ball::new(x, r1).unwrap();
            let b = Ball::new(x + r1 + gap + r2, r2).unwrap();
            let both = query_region(&mu, &RegionUnion::from_balls(&[a, b]));
            prop_assert!((both - query_local(&mu, &a) - query_local(&mu, &b)).abs() <= 1e-12);
        }
        let rep = verify_star_hypothesis(&mu, 500, seed);
        prop_assert_eq!(rep.multi_atom_violations, 0);
        prop_assert_eq!(rep.single_atom_violations, 0);
        prop_assert!(rep.worst_ratio.is_finite());
    }

    #[test]
    fn random_sequences_are_reproducible(seed in any::<u64>(), rate in 0.5f64..2.0) {
        let space = AhlforsSpace::unit_interval();
        let seq = BallSequence::random(seed, rate).unwrap();
        prop_assert_eq!(seq.generate(&space, 300).unwrap(), seq.generate(&space, 300).unwrap());
    }

    #[test]
    fn box_counts_obey_the_combinatorial_bound(parts in prop::collection::vec((0.0f64..0.9, 0.0f64..0.1), 1..20), k in 1u32..16) {
        let h = 2f64.powi(-(k as i32));
        let ivs: Vec<Interval> = parts.iter().map(|&(a, l)| Interval::new(a, a + h + l)).collect();
        let total = RegionUnion::from_intervals(ivs.iter().copied()).length();
        let n = cells_meeting(&ivs, k) as f64;
        prop_assert!(n >= total / h - 1e-9 && n <= total / h + 2.0 * ivs.len() as f64);
    }
}

#[test]
fn tree_brackets_are_consistent_and_shrink_with_depth() {
    let space = AhlforsSpace::unit_interval();
    let balls = rational_balls(3.0, 400);
    let params = TreeParams {
        f: DimensionFunction::power(0.5).unwrap(),
        delta: 1.0,
        c: 1.0,
    };
    let trees: Vec<_> = (1..=3)
        .map(|d| build_tree(&space, &balls, &params, d, &b0()).into_result().unwrap())
        .collect();
    assert!(trees[2].leaves().len() > trees[0].leaves().len());
    let mut rng = stream_rng(5, 0);
    for _ in 0..100 {
        let b = Ball::new(rng.random(), 0.2 * rng.random::<f64>() + 1e-6).unwrap();
        let brackets: Vec<(f64, f64)> = trees.iter().map(|t| t.query(&b)).collect();
        for (lo, hi) in &brackets {
            assert!(lo <= hi);
        }
        for w in brackets.windows(2) {
            assert!(w[1].0 >= w[0].0 - 1e-12 && w[1].1 <= w[0].1 + 1e-12, "{w:?}");
        }
    }
    for t in &trees {
        assert!(t.mass_conservation_error() <= 1e-9);
        assert!(t.children_separated() && t.rho_feasible() && t.children_in_tail(&balls));
    }
}
