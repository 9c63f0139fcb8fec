//! Independent oracles: exhaustive path enumeration on finite graphs, the
//! closed-form partial sums controlling exit summability on constructed
//! graphs, and cross-check harnesses pairing the two against the series
//! engine. Everything here recomputes from scratch on purpose; agreement
//! with the incremental machinery is the point.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::enclosure::{exp_enc, Enc, SeriesBudget};
use crate::error::{Error, Result};
use crate::graph::{EdgeBundle, ExitKind, ExitSpec, ExplicitGraph, FamilyKind, GraphView, VertexId};

fn finite_parts(b: &EdgeBundle) -> (u64, f64) {
    match b.family {
        FamilyKind::Finite { count, f } => (count, f),
        _ => unreachable!("infinite families are rejected up front"),
    }
}
use crate::harmonic::{boundary_vector, exit_summability, BoundaryOutcome, Summability};
use crate::harmonic::{Exists, KmsReport, MeasureLabel, RaySource};
use crate::spectrum::{classify_at, RecurrenceClass};
use crate::construct::intervals::{rat_enc, SequenceTriple};

/// Hard cap on DFS steps during path enumeration.
const ENUM_STEP_CAP: u64 = 20_000_000;

#[derive(Clone, Debug)]
pub enum WeightMode {
    /// Exact arithmetic in the formal variable t substituted for e^{-beta};
    /// requires F = 1 on every edge.
    RationalT(BigRational),
    RealBeta(f64),
}

#[derive(Clone, Debug)]
pub struct PathSumQuery {
    pub src: VertexId,
    pub dst: VertexId,
    pub max_length: usize,
    pub mode: WeightMode,
}

/// Weighted path sums indexed by length, `sums[n]` covering the paths of
/// length exactly n (so `sums[0]` is 1 or 0 by src = dst).
#[derive(Clone, Debug)]
pub enum PathSums {
    Exact(Vec<BigRational>),
    Certified(Vec<Enc>),
}

impl PathSums {
    pub fn exact(&self) -> &[BigRational] {
        match self {
            PathSums::Exact(v) => v,
            PathSums::Certified(_) => panic!("path sums were computed in real mode"),
        }
    }

    pub fn total_exact(&self) -> BigRational {
        self.exact().iter().sum()
    }

    pub fn total_enc(&self) -> Enc {
        match self {
            PathSums::Exact(v) => v.iter().fold(Enc::ZERO, |s, q| s.add(&rat_enc(q))),
            PathSums::Certified(v) => v.iter().fold(Enc::ZERO, |s, e| s.add(e)),
        }
    }
}

fn finite_graph(g: &GraphView) -> Result<&ExplicitGraph> {
    let fin = g.as_finite()?;
    if fin.all_bundles().any(|b| b.family.is_infinite()) {
        return Err(Error::Precondition(
            "path enumeration needs finitely many edges".into(),
        ));
    }
    Ok(fin)
}

/// Enumerates every path src -> dst of length <= max_length by direct DFS
/// over edge bundles (no matrix recursion) and sums the weights per length.
pub fn brute_force_path_sum(g: &GraphView, q: &PathSumQuery) -> Result<PathSums> {
    let fin = finite_graph(g)?;
    if !g.has_vertex(q.src) {
        return Err(Error::UnknownVertex(q.src));
    }
    if !g.has_vertex(q.dst) {
        return Err(Error::UnknownVertex(q.dst));
    }
    match &q.mode {
        WeightMode::RationalT(t) => {
            if fin.all_bundles().any(|b| finite_parts(b).1 != 1.0) {
                return Err(Error::Precondition(
                    "rational mode requires F = 1 on every edge".into(),
                ));
            }
            let mut sums = vec![BigRational::zero(); q.max_length + 1];
            if q.src == q.dst {
                sums[0] = BigRational::one();
            }
            let mut steps = 0u64;
            walk_exact(fin, q, q.src, 0, &BigRational::one(), t, &mut sums, &mut steps)?;
            Ok(PathSums::Exact(sums))
        }
        WeightMode::RealBeta(beta) => {
            let mut sums = vec![Enc::ZERO; q.max_length + 1];
            if q.src == q.dst {
                sums[0] = Enc::ONE;
            }
            let mut steps = 0u64;
            walk_real(fin, q, q.src, 0, &Enc::ONE, *beta, &mut sums, &mut steps)?;
            Ok(PathSums::Certified(sums))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn walk_exact(
    fin: &ExplicitGraph,
    q: &PathSumQuery,
    at: VertexId,
    len: usize,
    weight: &BigRational,
    t: &BigRational,
    sums: &mut [BigRational],
    steps: &mut u64,
) -> Result<()> {
    if len == q.max_length {
        return Ok(());
    }
    for b in fin.bundles(at) {
        *steps += 1;
        if *steps > ENUM_STEP_CAP {
            return Err(Error::Precondition("path enumeration cap exceeded".into()));
        }
        let w = weight * t * BigRational::from(BigInt::from(finite_parts(b).0));
        if b.dst == q.dst {
            sums[len + 1] += &w;
        }
        walk_exact(fin, q, b.dst, len + 1, &w, t, sums, steps)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn walk_real(
    fin: &ExplicitGraph,
    q: &PathSumQuery,
    at: VertexId,
    len: usize,
    weight: &Enc,
    beta: f64,
    sums: &mut [Enc],
    steps: &mut u64,
) -> Result<()> {
    if len == q.max_length {
        return Ok(());
    }
    for b in fin.bundles(at) {
        *steps += 1;
        if *steps > ENUM_STEP_CAP {
            return Err(Error::Precondition("path enumeration cap exceeded".into()));
        }
        let (count, f) = finite_parts(b);
        let w = weight
            .mul(&crate::enclosure::edge_weight(beta, f))
            .scale(count as f64);
        if b.dst == q.dst {
            sums[len + 1] = sums[len + 1].add(&w);
        }
        walk_real(fin, q, b.dst, len + 1, &w, beta, sums, steps)?;
    }
    Ok(())
}

/// Exact `A(t)^n_{src, dst}` for n = 0..=n_max by forward matrix recursion
/// in rational arithmetic (F = 1 graphs). The matrix-power partner of
/// [`brute_force_path_sum`].
pub fn rational_power_entries(
    g: &GraphView,
    t: &BigRational,
    src: VertexId,
    dst: VertexId,
    n_max: usize,
) -> Result<Vec<BigRational>> {
    let fin = finite_graph(g)?;
    if fin.all_bundles().any(|b| finite_parts(b).1 != 1.0) {
        return Err(Error::Precondition(
            "rational mode requires F = 1 on every edge".into(),
        ));
    }
    let mut out = Vec::with_capacity(n_max + 1);
    let mut x: BTreeMap<VertexId, BigRational> = BTreeMap::new();
    x.insert(src, BigRational::one());
    out.push(if src == dst {
        BigRational::one()
    } else {
        BigRational::zero()
    });
    for _ in 0..n_max {
        let mut next: BTreeMap<VertexId, BigRational> = BTreeMap::new();
        for (&u, mass) in &x {
            for b in fin.bundles(u) {
                let w = mass * t * BigRational::from(BigInt::from(finite_parts(b).0));
                *next.entry(b.dst).or_insert_with(BigRational::zero) += w;
            }
        }
        x = next;
        out.push(x.get(&dst).cloned().unwrap_or_else(BigRational::zero));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XyVariant {
    /// Attachment glued along a spine (diagram with a/b/d edges); x is valid
    /// at tail indices 2k+1.
    RowFinite,
    /// Attachment out of a single emitter (a/b/c edges).
    Emitter,
}

/// The closed-form partial sums whose suprema decide exit summability.
///
/// RowFinite: x(k) = 1 + sum_{i<=k} e^{i beta} c_i/(a_1..a_i) (the value of
/// x at tail index 2k+1), y(k) = sum_{i<=k-1} e^{-i beta} b_i/(a_1..a_i).
/// Emitter: x(k) = c_1^{-1}(1 + e^{-beta} sum_{i<=k} e^{i beta} c_i/(a_1..a_i)),
/// y(k) = c_1^{-1} sum_{i<=k-1} e^{-(i+2) beta} b_i/(a_1..a_i).
/// Both are non-decreasing in k.
pub fn closed_form_xy(
    triple: &mut SequenceTriple,
    beta: f64,
    k: usize,
    variant: XyVariant,
) -> (Enc, Enc) {
    let mut c_part = Enc::ZERO;
    for i in 1..=k {
        let term = rat_enc(&triple.qp(i)).mul(&exp_enc((i as f64) * beta));
        c_part = c_part.add(&term);
    }
    let mut b_part = Enc::ZERO;
    for i in 1..k {
        let term = rat_enc(&triple.q(i)).mul(&exp_enc(-(i as f64) * beta));
        b_part = b_part.add(&term);
    }
    match variant {
        XyVariant::RowFinite => (Enc::ONE.add(&c_part), b_part),
        XyVariant::Emitter => {
            let c1 = rat_enc(&BigRational::from(BigInt::from(triple.c(1))));
            let inv = Enc::ONE.div(&c1);
            let x = inv.mul(&Enc::ONE.add(&exp_enc(-beta).mul(&c_part)));
            let y = inv.mul(&exp_enc(-2.0 * beta).mul(&b_part));
            (x, y)
        }
    }
}

#[derive(Clone, Debug)]
pub struct CrossCheck {
    /// Tail index of the compared prefix.
    pub tail_index: usize,
    pub enumerated: (Enc, Enc),
    pub closed_form: (Enc, Enc),
    pub agree: bool,
    /// False when the enumeration hit the length cap before exhausting the
    /// simple paths.
    pub complete: bool,
}

/// Recomputes the x/y split from scratch on a constructed graph: enumerates
/// the simple paths from the exit's first vertex to its tail vertex t_K by
/// DFS over the streamed graph, splits them at length K per the defining
/// sums, rescales by e^{(K-1) beta} t(K)^{-1}, and compares against
/// [`closed_form_xy`].
pub fn cross_check_exit(
    g: &GraphView,
    exit: &ExitSpec,
    beta: f64,
    k_max: usize,
    l_max: usize,
) -> Result<Vec<CrossCheck>> {
    let (built, removed) = g
        .built_parts()
        .map(|(b, r)| (b.clone(), r))
        .ok_or_else(|| Error::Precondition("cross-check needs a constructed graph".into()))?;
    let ExitKind::Attachment { index } = exit.kind else {
        return Err(Error::Precondition(
            "cross-check targets attachment exits".into(),
        ));
    };
    let variant = match built.shape() {
        crate::construct::built::Shape::Spine => XyVariant::RowFinite,
        crate::construct::built::Shape::StarCore { .. } => XyVariant::Emitter,
    };
    let mut out = Vec::new();
    let tail_indices: Vec<usize> = match variant {
        // x closed form holds at odd tail indices only.
        XyVariant::RowFinite => (1..).map(|k| 2 * k + 1).take_while(|&k| k <= k_max).collect(),
        XyVariant::Emitter => (3..=k_max).collect(),
    };
    for tail_k in tail_indices {
        let t1 = g.exit_vertex(exit, 0)?;
        let tk = g.exit_vertex(exit, tail_k - 1)?;
        use crate::construct::built::StructuralRole;
        // Structural pruning bounds: only vertices that can still reach t_K
        // are worth exploring. Tail vertices move forward only, so tails past
        // t_K are dead ends; core vertices matter only while an entry edge
        // into a tail at or below t_K still lies ahead; return / mass chains
        // all terminate at the base vertex, materialized first as vertex 0.
        let mk = match built.structural_role(tk)? {
            StructuralRole::Tail { index: m, .. } => m,
            other => {
                return Err(Error::Precondition(format!(
                    "exit vertex {tk} is not a tail vertex ({other:?})"
                )))
            }
        };
        let spine_bound = built.contact_index(index) + 2 * mk - 3;
        let base: VertexId = 0;
        // Weighted simple-path sums split at length K.
        let mut below = Enc::ZERO;
        let mut at_or_above = Enc::ZERO;
        let mut complete = true;
        let mut stack: Vec<(VertexId, usize, Enc, Vec<VertexId>)> =
            vec![(t1, 0, Enc::ONE, vec![t1])];
        while let Some((at, len, weight, seen)) = stack.pop() {
            if len >= l_max {
                complete = false;
                continue;
            }
            // Width covers every bundle that can still reach t_K: the
            // attachment layer only moves forward along the tail. Exact
            // multiplicities keep deep interval-rule bundles enumerable.
            let (bundles, _) = built.out_bundles_big(at, l_max.max(tail_k + 8), removed)?;
            for (dst, count, f) in &bundles {
                if seen.contains(dst) {
                    continue;
                }
                if *dst != tk {
                    let productive = match built.structural_role(*dst)? {
                        StructuralRole::Tail { attachment, index: m }
                        | StructuralRole::EntryPath { attachment, index: m } => {
                            attachment == index && m <= mk
                        }
                        StructuralRole::Core(n) => n <= spine_bound,
                        StructuralRole::Satellite(_)
                        | StructuralRole::ReturnPath
                        | StructuralRole::MassChain => !seen.contains(&base),
                    };
                    if !productive {
                        continue;
                    }
                }
                let w = weight
                    .mul(&crate::enclosure::edge_weight(beta, *f))
                    .mul(&crate::construct::intervals::biguint_enc(count));
                if *dst == tk {
                    if len + 1 <= tail_k - 1 {
                        below = below.add(&w);
                    } else {
                        at_or_above = at_or_above.add(&w);
                    }
                    continue;
                }
                let mut s = seen.clone();
                s.push(*dst);
                stack.push((*dst, len + 1, w, s));
            }
        }
        // t(K) = a_1 .. a_{K-1}; rescale by e^{(K-1) beta} / t(K).
        let t_k = built.with_triple(index, |tr| tr.prod(tail_k - 1));
        let scale = exp_enc((tail_k as f64 - 1.0) * beta)
            .div(&crate::construct::intervals::biguint_enc(&t_k));
        let enum_x = below.mul(&scale);
        let enum_y = at_or_above.mul(&scale);
        let cf_k = match variant {
            XyVariant::RowFinite => (tail_k - 1) / 2,
            XyVariant::Emitter => tail_k - 1,
        };
        let (cf_x_raw, _) = built.with_triple(index, |tr| closed_form_xy(tr, beta, cf_k, variant));
        let (_, cf_y) = built.with_triple(index, |tr| closed_form_xy(tr, beta, tail_k, variant));
        let agree = complete && enum_x.intersects(&cf_x_raw) && enum_y.intersects(&cf_y);
        out.push(CrossCheck {
            tail_index: tail_k,
            enumerated: (enum_x, enum_y),
            closed_form: (cf_x_raw, cf_y),
            agree,
            complete,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct VerifyListing {
    pub claims: Vec<(String, bool)>,
}

impl VerifyListing {
    pub fn pass(&self) -> bool {
        self.claims.iter().all(|(_, ok)| *ok)
    }
}

/// Re-derives every claim of a KMS report from primitives under an
/// independent budget and lists pass/fail per claim.
pub fn verify_report(
    g: &GraphView,
    beta: f64,
    report: &KmsReport,
    budget: &SeriesBudget,
) -> Result<VerifyListing> {
    let mut claims = Vec::new();
    let rec = classify_at(g, 0, beta, budget)?;
    claims.push((
        "recurrence class re-derived".into(),
        matches!(rec, RecurrenceClass::Indeterminate(_)) || rec == report.recurrence,
    ));
    claims.push((
        "boundary rays only in the transient case".into(),
        report.boundary_rays.is_empty() || report.recurrence == RecurrenceClass::Transient,
    ));
    let label_ok = match report.recurrence {
        RecurrenceClass::Recurrent => report.measure_label == MeasureLabel::Conservative,
        RecurrenceClass::Transient => report.measure_label == MeasureLabel::Dissipative,
        RecurrenceClass::Indeterminate(_) => report.measure_label == MeasureLabel::Unknown,
    };
    claims.push(("measure label matches recurrence".into(), label_ok));
    if report.exists == Exists::No {
        claims.push((
            "non-existence leaves no rays".into(),
            report.boundary_rays.is_empty() && report.harmonic_rays.is_empty(),
        ));
    }
    for (v, _) in &report.boundary_rays {
        let ok = matches!(
            boundary_vector(g, beta, *v, &[*v], budget),
            Ok(BoundaryOutcome::Vector(_))
        );
        claims.push((format!("boundary ray at vertex {v} is summable"), ok));
    }
    for (src, _) in &report.harmonic_rays {
        match src {
            RaySource::UniqueRecurrent => {
                claims.push((
                    "recurrent ray only under recurrence".into(),
                    report.recurrence == RecurrenceClass::Recurrent,
                ));
            }
            RaySource::Exit(spec) => {
                let ok = matches!(
                    exit_summability(g, beta, spec, budget),
                    Ok(Summability::Summable(_))
                );
                claims.push((format!("exit '{}' is summable", spec.name), ok));
            }
        }
    }
    Ok(VerifyListing { claims })
}
