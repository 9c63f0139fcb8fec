//! Property tests: random finite graphs against exact rational oracles and
//! the structural invariants of the analysis layer.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use kmsgraph::construct::intervals::rat_enc;
use kmsgraph::graph::{ExplicitGraph, GraphView};
use kmsgraph::series::{power_entry, power_entry_gauge};
use kmsgraph::spectrum::{classify_at, renewal_check, RecurrenceClass};
use kmsgraph::verify::{
    brute_force_path_sum, rational_power_entries, PathSumQuery, WeightMode,
};
use kmsgraph::{Enc, SeriesBudget};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Adjacency counts for an n-vertex graph, each entry 0..=3 parallel edges,
/// F = 1 everywhere.
fn arb_counts() -> impl Strategy<Value = Vec<Vec<u8>>> {
    (2usize..=6).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec(0u8..=3, n), n)
    })
}

fn graph_from(counts: &[Vec<u8>]) -> GraphView {
    let n = counts.len();
    let mut g = ExplicitGraph::new(n);
    for (u, row) in counts.iter().enumerate() {
        for (w, &c) in row.iter().enumerate() {
            if c > 0 {
                g.add_edge(u as u32, w as u32, c as u64, 1.0);
            }
        }
    }
    GraphView::from_explicit(g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Exhaustive path enumeration and the matrix power recursion count the
    /// same weighted paths, length by length, in exact arithmetic.
    #[test]
    fn enumeration_matches_matrix_powers(
        counts in arb_counts(),
        src in 0u32..6,
        dst in 0u32..6,
        ti in 0usize..3,
    ) {
        let n = counts.len() as u32;
        let g = graph_from(&counts);
        let (src, dst) = (src % n, dst % n);
        let t = [rat(1, 2), rat(1, 3), rat(1, 5)][ti].clone();
        let sums = brute_force_path_sum(&g, &PathSumQuery {
            src,
            dst,
            max_length: 5,
            mode: WeightMode::RationalT(t.clone()),
        }).unwrap();
        let powers = rational_power_entries(&g, &t, src, dst, 5).unwrap();
        prop_assert_eq!(sums.exact(), &powers[..]);
    }

    /// The interval-arithmetic matrix power always encloses the exact
    /// rational value.
    #[test]
    fn gauge_power_encloses_exact_value(
        counts in arb_counts(),
        src in 0u32..6,
        dst in 0u32..6,
        n in 1u32..=5,
    ) {
        let nv = counts.len() as u32;
        let g = graph_from(&counts);
        let (src, dst) = (src % nv, dst % nv);
        let t = rat(1, 3);
        let exact = rational_power_entries(&g, &t, src, dst, n as usize).unwrap();
        let enc = power_entry_gauge(&g, Enc::around(1.0 / 3.0), n, src, dst).unwrap();
        prop_assert!(
            enc.intersects(&rat_enc(&exact[n as usize])),
            "enclosure {enc:?} misses exact {}",
            exact[n as usize]
        );
    }

    /// First-return decomposition sandwich, exact over rationals, on
    /// strongly connected graphs.
    #[test]
    fn renewal_sandwich_holds(
        counts in arb_counts(),
        ti in 0usize..3,
        n in 1usize..=5,
    ) {
        let g = graph_from(&counts);
        prop_assume!(g.as_finite().unwrap().is_strongly_connected());
        prop_assume!(!g.as_finite().unwrap().bundles(0).is_empty());
        let t = [rat(1, 2), rat(1, 3), rat(1, 5)][ti].clone();
        prop_assert!(renewal_check(&g, 0, &t, n).unwrap());
    }

    /// Recurrence at one vertex of a strongly connected graph decides it for
    /// every vertex (whenever both classifications are certified).
    #[test]
    fn classification_is_base_independent(
        counts in arb_counts(),
        bi in 0usize..3,
    ) {
        let g = graph_from(&counts);
        let fin = g.as_finite().unwrap();
        prop_assume!(fin.is_strongly_connected());
        prop_assume!(fin.all_bundles().next().is_some());
        let beta = [0.8, 1.3, 2.2][bi];
        let budget = SeriesBudget::default();
        let classes: Vec<RecurrenceClass> = (0..fin.len() as u32)
            .map(|v| classify_at(&g, v, beta, &budget).unwrap())
            .collect();
        let mut certified = classes
            .iter()
            .filter(|c| !matches!(c, RecurrenceClass::Indeterminate(_)));
        if let Some(first) = certified.next() {
            for c in certified {
                prop_assert_eq!(c, first);
            }
        }
    }

    /// Deepening a truncation only adds paths: certified lower bounds grow
    /// monotonically and stay below the full-graph enclosure.
    #[test]
    fn truncation_power_is_monotone(n in 1u32..=4) {
        let g = kmsgraph::kgd::power_law_pair();
        let budget = SeriesBudget::default();
        let full = power_entry(&g, 2.5, n, 0, 0, &budget).unwrap();
        let mut prev = 0.0f64;
        for width in [2usize, 4, 8, 16] {
            let t = g.truncate(2, width).unwrap().as_view();
            let cut = power_entry(&t, 2.5, n, 0, 0, &budget).unwrap();
            prop_assert!(cut.lo >= prev - 1e-12);
            prop_assert!(cut.lo <= full.hi + 1e-12);
            prev = cut.lo;
        }
    }
}
