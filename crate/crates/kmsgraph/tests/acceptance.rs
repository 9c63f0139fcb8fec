//! End-to-end acceptance checks. Each test prints exactly one pass/fail line
//! naming its criterion; run with `--nocapture` to see them all.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use kmsgraph::construct::intervals::IntervalSpec;
use kmsgraph::construct::{
    build, greedy_completion, interval_sequences, j_membership, ConstructionRecipe, EmitterCount,
    Membership, Theorem,
};
use kmsgraph::enclosure::exp_enc;
use kmsgraph::graph::{is_bare_exit, BareStatus, ExplicitGraph, FamilyKind, GraphView};
use kmsgraph::harmonic::{
    almost_harmonic_check, boundary_vector, enumerate_kms, exit_summability, markov_bridge,
    riesz_decompose, AlmostHarmonicReport, BoundaryOutcome, Exists, HarmonicVector, Summability,
};
use kmsgraph::kgd::power_law_pair;
use kmsgraph::series::{entry, family_weight, green};
use kmsgraph::spectrum::{classify, simple_loops, renewal_check, RecurrenceClass};
use kmsgraph::verify::{
    brute_force_path_sum, cross_check_exit, rational_power_entries, PathSumQuery, WeightMode,
};
use kmsgraph::{Enc, SeriesBudget};

type Check = std::result::Result<(), String>;

fn criterion(n: u32, name: &str, f: impl FnOnce() -> Check) {
    match f() {
        Ok(()) => println!("criterion {n:02} ({name}): PASS"),
        Err(e) => {
            println!("criterion {n:02} ({name}): FAIL - {e}");
            panic!("criterion {n} ({name}) failed: {e}");
        }
    }
}

fn ensure(ok: bool, msg: impl Into<String>) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn budget() -> SeriesBudget {
    SeriesBudget::default()
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// The shared random suite: strongly connected graphs, <= 6 vertices, <= 3
/// parallel edges, F = 1.
fn seeded_suite(count: usize) -> Vec<GraphView> {
    let mut rng = StdRng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.gen_range(2..=6usize);
        let mut g = ExplicitGraph::new(n);
        for u in 0..n as u32 {
            for w in 0..n as u32 {
                if rng.gen_bool(0.4) {
                    g.add_edge(u, w, rng.gen_range(1..=3), 1.0);
                }
            }
        }
        if g.is_strongly_connected() && g.all_bundles().next().is_some() {
            out.push(GraphView::from_explicit(g));
        }
    }
    out
}

#[test]
fn c01_renewal_sandwich() {
    criterion(1, "renewal sandwich on random graphs", || {
        let start = Instant::now();
        let suite = seeded_suite(50);
        let mut rng = StdRng::seed_from_u64(17);
        for (i, g) in suite.iter().enumerate() {
            for t in [rat(1, 2), rat(1, 3), rat(1, 5)] {
                let n = rng.gen_range(1..=5usize);
                let ok = renewal_check(g, 0, &t, n).map_err(|e| format!("graph {i}: {e}"))?;
                ensure(ok, format!("sandwich violated on graph {i} (t={t}, N={n})"))?;
            }
        }
        ensure(
            start.elapsed().as_secs_f64() < 10.0,
            format!("too slow: {:?}", start.elapsed()),
        )
    });
}

/// Certified value of s(b) + e^{-2b} + s(b)e^{-2b}/(1 - s(b)), the loop
/// series of the power-law pair at its base vertex.
fn exx1_series(beta: f64) -> Enc {
    let s = family_weight(
        &FamilyKind::PowerLaw { offset: 2 },
        beta,
        &budget(),
    )
    .unwrap();
    let e2 = exp_enc(-2.0 * beta);
    let denom = Enc::new((1.0 - s.hi).max(0.0), (1.0 - s.lo).max(0.0));
    s.add(&e2).add(&s.mul(&e2).div(&denom))
}

#[test]
fn c02_power_law_pair_critical_point() {
    criterion(2, "worked-example critical point and ray counts", || {
        let start = Instant::now();
        let (mut a, mut b) = (1.73f64, 2.0f64);
        ensure(exx1_series(a).lo > 1.0, "series not above 1 at left bracket")?;
        ensure(exx1_series(b).hi < 1.0, "series not below 1 at right bracket")?;
        while b - a > 1e-9 {
            let m = 0.5 * (a + b);
            let v = exx1_series(m);
            if v.lo > 1.0 {
                a = m;
            } else if v.hi < 1.0 {
                b = m;
            } else {
                break;
            }
        }
        ensure(b - a <= 1e-8, format!("bracket stuck at width {}", b - a))?;
        let beta0 = 0.5 * (a + b);
        let g = power_law_pair();
        let above = enumerate_kms(&g, beta0 + 0.1, &budget()).map_err(|e| e.to_string())?;
        ensure(
            above.boundary_rays.len() == 2 && above.harmonic_rays.is_empty(),
            format!(
                "above critical: {} boundary, {} harmonic",
                above.boundary_rays.len(),
                above.harmonic_rays.len()
            ),
        )?;
        let critical = enumerate_kms(&g, beta0, &budget()).map_err(|e| e.to_string())?;
        ensure(
            critical.harmonic_rays.len() == 1,
            format!("critical: {} harmonic rays", critical.harmonic_rays.len()),
        )?;
        let below = enumerate_kms(&g, beta0 - 0.1, &budget()).map_err(|e| e.to_string())?;
        ensure(
            below.exists == Exists::No,
            format!("below critical: exists = {:?}", below.exists),
        )?;
        ensure(
            start.elapsed().as_secs_f64() < 30.0,
            format!("too slow: {:?}", start.elapsed()),
        )
    });
}

#[test]
fn c03_riesz_round_trip() {
    criterion(3, "Riesz decomposition round-trip", || {
        let mut rng = StdRng::seed_from_u64(23);
        let mut done = 0;
        while done < 20 {
            let n = rng.gen_range(2..=5usize);
            let mut g = ExplicitGraph::new(n);
            let mut max_row = 0u64;
            for u in 0..n as u32 {
                let mut row = 0u64;
                for w in 0..n as u32 {
                    if rng.gen_bool(0.5) {
                        let c = rng.gen_range(1..=2u64);
                        g.add_edge(u, w, c, 1.0);
                        row += c;
                    }
                }
                max_row = max_row.max(row);
            }
            if max_row == 0 {
                continue;
            }
            let psi_vals: Vec<f64> = (0..n).map(|_| [1.0, 1.5, 2.0][rng.gen_range(0..3)]).collect();
            let (pmin, pmax) = (
                psi_vals.iter().cloned().fold(f64::INFINITY, f64::min),
                psi_vals.iter().cloned().fold(0.0, f64::max),
            );
            // Choose beta so row sums of A(beta) stay below 0.8 relative to
            // the smallest psi entry: psi is then strictly super-harmonic.
            let beta = ((max_row as f64 * pmax) / (0.8 * pmin)).ln().max(0.3);
            let view = GraphView::from_explicit(g);
            let psi = HarmonicVector::from_values(
                (0..n as u32).map(|v| (v, Enc::exact(psi_vals[v as usize]))).collect(),
            );
            let parts =
                riesz_decompose(&view, beta, &psi, &budget()).map_err(|e| e.to_string())?;
            // Independent reconstruction: S = sum_{m <= N} A^m k, iterated
            // with full enclosures; tail certified geometric by q < 0.85.
            let a: Vec<Vec<Enc>> = (0..n as u32)
                .map(|v| {
                    (0..n as u32)
                        .map(|w| entry(&view, beta, v, w, &budget()).unwrap())
                        .collect()
                })
                .collect();
            let q = a
                .iter()
                .map(|row| row.iter().map(|e| e.hi).sum::<f64>())
                .fold(0.0f64, f64::max);
            ensure(q < 0.85, format!("row-sum bound broke: {q}"))?;
            let k: Vec<Enc> = (0..n as u32).map(|v| parts.k.get(v).unwrap()).collect();
            let h: Vec<Enc> = (0..n as u32).map(|v| parts.h.get(v).unwrap()).collect();
            let kmax = k.iter().map(|e| e.hi).fold(0.0f64, f64::max);
            let mut x = k.clone();
            let mut s = k.clone();
            let n_terms = 220usize;
            for _ in 0..n_terms {
                let mut next = vec![Enc::ZERO; n];
                for v in 0..n {
                    for w in 0..n {
                        next[v] = next[v].add(&a[v][w].mul(&x[w]));
                    }
                }
                x = next;
                for v in 0..n {
                    s[v] = s[v].add(&x[v]);
                }
            }
            let tail = kmax * q.powi(n_terms as i32 + 1) / (1.0 - q);
            for v in 0..n {
                let rebuilt = h[v].add(&s[v]);
                let err = (rebuilt.mid() - psi_vals[v]).abs() + rebuilt.width() + tail;
                ensure(
                    err <= 1e-9,
                    format!("reconstruction off by {err} at vertex {v}"),
                )?;
                // Harmonicity defect of h.
                let mut row = Enc::ZERO;
                for w in 0..n {
                    row = row.add(&a[v][w].mul(&h[w]));
                }
                let defect = (row.mid() - h[v].mid()).abs();
                ensure(
                    defect <= 1e-9 + row.width() + h[v].width(),
                    format!("harmonic part has defect {defect} at vertex {v}"),
                )?;
            }
            done += 1;
        }
        Ok(())
    });
}

#[test]
fn c04_boundary_vector_contract() {
    criterion(4, "boundary vector of the loop-and-sink graph", || {
        let mut g = ExplicitGraph::new(2);
        g.add_edge(0, 0, 1, 1.0);
        g.add_edge(0, 1, 1, 1.0);
        let g = GraphView::from_explicit(g);
        for beta in [0.5, 1.0, 2.0] {
            let out = boundary_vector(&g, beta, 1, &[0, 1], &budget())
                .map_err(|e| e.to_string())?;
            let BoundaryOutcome::Vector(psi) = out else {
                return Err(format!("no vector at beta {beta}"));
            };
            let want = (-beta).exp() / (1.0 - (-beta).exp());
            let got = psi.get(0).unwrap();
            ensure(
                got.contains(want)
                    && (got.lo - want).abs() <= 1e-12
                    && (got.hi - want).abs() <= 1e-12,
                format!("beta {beta}: {got:?} vs closed form {want}"),
            )?;
            let report = almost_harmonic_check(&g, beta, &psi, &[0, 1], &budget())
                .map_err(|e| e.to_string())?;
            ensure(
                report
                    == AlmostHarmonicReport::AlmostHarmonic {
                        defect_support: vec![1],
                    },
                format!("beta {beta}: defect not at the sink: {report:?}"),
            )?;
        }
        Ok(())
    });
}

#[test]
fn c05_stochastic_bridge() {
    criterion(5, "stochastic bridge rows and power identity", || {
        let ln2 = std::f64::consts::LN_2;
        let mut fixtures: Vec<(GraphView, HarmonicVector)> = Vec::new();
        let mut two = ExplicitGraph::new(1);
        two.add_edge(0, 0, 2, 1.0);
        fixtures.push((
            GraphView::from_explicit(two),
            HarmonicVector::constant([0], 1.0),
        ));
        let mut cyc = ExplicitGraph::new(2);
        cyc.add_edge(0, 1, 2, 1.0);
        cyc.add_edge(1, 0, 2, 1.0);
        fixtures.push((
            GraphView::from_explicit(cyc),
            HarmonicVector::constant([0, 1], 1.0),
        ));
        let mut tri = ExplicitGraph::new(3);
        tri.add_edge(0, 1, 1, 1.0);
        tri.add_edge(1, 2, 2, 1.0);
        tri.add_edge(2, 0, 4, 1.0);
        fixtures.push((
            GraphView::from_explicit(tri),
            HarmonicVector::from_values(
                [(0, Enc::exact(1.0)), (1, Enc::exact(2.0)), (2, Enc::exact(2.0))]
                    .into_iter()
                    .collect(),
            ),
        ));
        for (i, (g, psi)) in fixtures.iter().enumerate() {
            let bridge = markov_bridge(g, ln2, psi).map_err(|e| format!("fixture {i}: {e}"))?;
            let m = bridge.edge_bundle_count();
            for e in 0..m {
                let row = bridge.row_sum(e);
                ensure(
                    row.contains(1.0) && (row.lo - 1.0).abs() <= 1e-12 && (row.hi - 1.0).abs() <= 1e-12,
                    format!("fixture {i}: row {e} sums to {row:?}"),
                )?;
            }
            for n in 1..=4 {
                let ok = bridge
                    .power_identity_check(g, n, &budget())
                    .map_err(|e| format!("fixture {i}, n {n}: {e}"))?;
                ensure(ok, format!("fixture {i}: power identity fails at n {n}"))?;
            }
        }
        Ok(())
    });
}

#[test]
fn c06_interval_realization() {
    criterion(6, "all six summability interval shapes", || {
        let start = Instant::now();
        let shapes = [
            IntervalSpec::new(1.0, 2.0, true, true),
            IntervalSpec::new(1.0, 2.0, true, false),
            IntervalSpec::new(1.0, 2.0, false, true),
            IntervalSpec::new(1.0, 2.0, false, false),
            IntervalSpec::new(1.0, f64::INFINITY, true, false),
            IntervalSpec::new(1.0, f64::INFINITY, false, false),
        ];
        for iv in shapes {
            let mut triple = interval_sequences(iv).map_err(|e| e.to_string())?;
            for beta in [0.9, 1.0, 1.5, 2.0, 2.1] {
                let m = j_membership(&mut triple, beta, 4096).map_err(|e| e.to_string())?;
                let inside = iv.contains(beta);
                match (&m, inside) {
                    (Membership::Member { .. }, true) => {}
                    (Membership::NotMember { .. }, false) => {}
                    _ => {
                        return Err(format!(
                            "shape {iv}: beta {beta} decided {m:?}, expected member={inside}"
                        ))
                    }
                }
            }
        }
        ensure(
            start.elapsed().as_secs_f64() < 60.0,
            format!("too slow: {:?}", start.elapsed()),
        )
    });
}

#[test]
fn c07_greedy_completion_postconditions() {
    criterion(7, "greedy series completion invariants", || {
        let third = Enc::new((1.0f64 / 3.0).next_down(), (1.0f64 / 3.0).next_up());
        for d in [Enc::exact(0.5), third] {
            for empty_a in [true, false] {
                let sa = if empty_a { Enc::ZERO } else { d.pow(2) };
                let g = greedy_completion(d, sa, 12).map_err(|e| e.to_string())?;
                let ps = g.placements();
                ensure(ps.len() == 12, "wrong placement count")?;
                let mut big = 0;
                let mut prev_n = 1u64;
                for p in ps {
                    ensure(p.gap.hi > 0.0, format!("gap died at m={}", p.m))?;
                    ensure(
                        p.gap.lo <= g.s.hi / p.m as f64 + 1e-12,
                        format!("gap above s/m at m={}", p.m),
                    )?;
                    ensure(p.n_m > prev_n, "placement indices not increasing")?;
                    prev_n = p.n_m;
                    if p.k_m >= num_bigint::BigUint::from(2u32) {
                        big += 1;
                    }
                    if p.m >= 2 {
                        // Growth witness: k_m D^{n_m} >= s_m - s_{m-1}.
                        let mass = d
                            .pow(p.n_m as u32)
                            .mul(&kmsgraph::construct::intervals::biguint_enc(&p.k_m));
                        let step = g.s.scale(0.5f64.powi(p.m as i32));
                        ensure(
                            mass.hi >= step.lo,
                            format!("mass under scheduled step at m={}", p.m),
                        )?;
                    }
                }
                ensure(big >= 3, format!("only {big} placements carry k >= 2"))?;
            }
        }
        // Violated slack precondition.
        ensure(
            greedy_completion(Enc::exact(0.5), Enc::exact(0.6), 1).is_err(),
            "oversized a-series was accepted",
        )
    });
}

fn rev2_recipe() -> ConstructionRecipe {
    let h = std::f64::consts::LN_2;
    ConstructionRecipe {
        theorem: Theorem::Rev2,
        h,
        intervals: vec![
            IntervalSpec::new(h, f64::INFINITY, true, false),
            IntervalSpec::new(h + 1.0, h + 2.0, true, true),
        ],
        emitters: None,
    }
}

#[test]
fn c08_rev2_end_to_end() {
    criterion(8, "spine pipeline end to end", || {
        let start = Instant::now();
        let h = std::f64::consts::LN_2;
        let (g, gp) = build(&rev2_recipe()).map_err(|e| e.to_string())?;
        let gp = gp.ok_or("missing loop-removed companion")?;
        let rec = classify(&gp, h, &budget()).map_err(|e| e.to_string())?;
        ensure(
            rec == RecurrenceClass::Transient,
            format!("companion at h: {rec:?}"),
        )?;
        let rec = classify(&g, h, &budget()).map_err(|e| e.to_string())?;
        ensure(
            rec == RecurrenceClass::Recurrent,
            format!("full graph at h: {rec:?}"),
        )?;
        let series = simple_loops(&g, 0, h, 60, &budget()).map_err(|e| e.to_string())?;
        let total = series.total();
        ensure(
            total.contains(1.0) && total.lo >= 1.0 - 1e-6,
            format!("loop sum misses 1: {total:?}"),
        )?;
        let exit = g.declared_exits[1].clone();
        match exit_summability(&gp, h + 1.5, &exit, &budget()).map_err(|e| e.to_string())? {
            Summability::Summable(_) => {}
            other => return Err(format!("inside the interval: {other:?}")),
        }
        for beta in [h + 0.5, h + 2.5] {
            match exit_summability(&gp, beta, &exit, &budget()).map_err(|e| e.to_string())? {
                Summability::NotSummable => {}
                other => return Err(format!("outside the interval at {beta}: {other:?}")),
            }
        }
        let checks =
            cross_check_exit(&gp, &exit, h + 1.5, 5, 16).map_err(|e| e.to_string())?;
        ensure(!checks.is_empty(), "cross-check produced no comparisons")?;
        for c in &checks {
            ensure(
                c.agree,
                format!(
                    "oracle disagrees at tail index {}: {:?} vs {:?}",
                    c.tail_index, c.enumerated, c.closed_form
                ),
            )?;
        }
        ensure(
            start.elapsed().as_secs_f64() < 120.0,
            format!("too slow: {:?}", start.elapsed()),
        )
    });
}

#[test]
fn c09_intro1_pipeline() {
    criterion(9, "star-core pipeline ray counts", || {
        let h = std::f64::consts::LN_2;
        let recipe = ConstructionRecipe {
            theorem: Theorem::Intro1,
            h,
            intervals: vec![IntervalSpec::new(h + 1.0, h + 2.0, false, false)],
            emitters: Some(EmitterCount::Finite(2)),
        };
        let (g, _) = build(&recipe).map_err(|e| e.to_string())?;
        for depth in [6usize, 12, 20] {
            let t = g.truncate(depth, 12).map_err(|e| e.to_string())?;
            let emitters = (0..t.graph.len() as u32)
                .filter(|&v| t.graph.is_declared_emitter(v))
                .count();
            ensure(
                emitters == 2,
                format!("depth {depth}: {emitters} emitters"),
            )?;
        }
        let inside = enumerate_kms(&g, h + 1.5, &budget()).map_err(|e| e.to_string())?;
        ensure(
            inside.boundary_rays.len() == 2 && inside.harmonic_rays.len() == 1,
            format!(
                "inside the interval: {} boundary, {} harmonic",
                inside.boundary_rays.len(),
                inside.harmonic_rays.len()
            ),
        )?;
        let outside = enumerate_kms(&g, h + 0.5, &budget()).map_err(|e| e.to_string())?;
        ensure(
            outside.boundary_rays.len() == 2 && outside.harmonic_rays.is_empty(),
            format!(
                "outside the interval: {} boundary, {} harmonic",
                outside.boundary_rays.len(),
                outside.harmonic_rays.len()
            ),
        )
    });
}

#[test]
fn c10_oracle_equivalence() {
    criterion(10, "path enumeration equals matrix powers", || {
        let suite = seeded_suite(50);
        let mut rng = StdRng::seed_from_u64(29);
        for (i, g) in suite.iter().enumerate() {
            let n = g.vertex_count().unwrap() as u32;
            let (src, dst) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let t = rat(1, 2);
            let sums = brute_force_path_sum(
                g,
                &PathSumQuery {
                    src,
                    dst,
                    max_length: 5,
                    mode: WeightMode::RationalT(t.clone()),
                },
            )
            .map_err(|e| format!("graph {i}: {e}"))?;
            let powers = rational_power_entries(g, &t, src, dst, 5)
                .map_err(|e| format!("graph {i}: {e}"))?;
            ensure(
                sums.exact() == &powers[..],
                format!("graph {i}: length-indexed sums diverge"),
            )?;
        }
        Ok(())
    });
}

#[test]
fn c11_bare_backbone_summability() {
    criterion(11, "backbone bareness and Green-function criterion", || {
        let h = std::f64::consts::LN_2;
        let rev1 = ConstructionRecipe {
            theorem: Theorem::Rev1,
            h,
            intervals: vec![IntervalSpec::new(h, f64::INFINITY, false, false)],
            emitters: None,
        };
        for recipe in [rev1, rev2_recipe()] {
            let (g, _) = build(&recipe).map_err(|e| e.to_string())?;
            let backbone = g.declared_exits[0].clone();
            let status = is_bare_exit(&g, &backbone, 40).map_err(|e| e.to_string())?;
            ensure(
                matches!(status, BareStatus::EventuallyBare { .. }),
                format!("backbone status: {status:?}"),
            )?;
            let small = SeriesBudget::default().with_max_terms(64);
            for beta in [h - 0.15, h + 0.3, h + 1.0, h + 2.0] {
                let transient = beta > h;
                let gtt = green(&g, beta, 0, 0, &small).map_err(|e| e.to_string())?;
                let summ =
                    exit_summability(&g, beta, &backbone, &small).map_err(|e| e.to_string())?;
                if transient {
                    ensure(
                        gtt.hi.is_finite(),
                        format!("beta {beta}: Green function not certified finite"),
                    )?;
                    ensure(
                        matches!(summ, Summability::Summable(_)),
                        format!("beta {beta}: backbone not summable: {summ:?}"),
                    )?;
                } else {
                    ensure(
                        !gtt.hi.is_finite(),
                        format!("beta {beta}: Green function unexpectedly finite"),
                    )?;
                    ensure(
                        !matches!(summ, Summability::Summable(_)),
                        format!("beta {beta}: backbone summable below entropy"),
                    )?;
                }
            }
        }
        Ok(())
    });
}
