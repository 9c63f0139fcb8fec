//! Loop analysis: first-return loop series, recurrence/transience
//! classification, entropy and pressure, and operations on graphs whose base
//! vertex carries a single length-1 loop realizing the entropy.
//!
//! The classification rests on the first-return criterion: with
//! L(beta) = sum_n l^n_{vv}(beta) over simple (first-return) loops at v, the
//! matrix A(beta) is recurrent exactly when L(beta) >= 1. All series values
//! are enclosures; a third Indeterminate outcome absorbs the cases a finite
//! computation cannot decide.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::enclosure::{exp_enc, ln_enc, sum_enc, Enc, SeriesBudget};
use crate::error::{Error, Result};
use crate::graph::{ExplicitGraph, FamilyKind, GraphInner, GraphView, VertexId};
use crate::series::build_slice;

/// Width of the band below 1 inside which a loop-sum enclosure whose upper
/// bound reaches 1 is still classified Recurrent. Needed because series that
/// sum to exactly 1 (completed pipelines at their entropy, or 2 e^{-log 2})
/// can only ever be enclosed, never certified from below.
pub const CRITICAL_BAND: f64 = 1e-6;

/// Tolerance for certificate equalities of the form "series = 1".
pub const CERT_TOL: f64 = 1e-6;

/// First-return loop sums at a base vertex.
#[derive(Clone, Debug)]
pub struct LoopSeries {
    pub base: VertexId,
    pub beta: f64,
    /// Enclosures of l^n_{vv}(beta), n = 1..=terms.len().
    pub terms: Vec<Enc>,
    /// Enclosure of the remainder past the listed terms.
    pub tail: Enc,
}

impl LoopSeries {
    /// Enclosure of the full sum L(beta).
    pub fn total(&self) -> Enc {
        sum_enc(&self.terms).add(&self.tail)
    }

    /// Enclosure of the listed partial sum only.
    pub fn partial(&self) -> Enc {
        sum_enc(&self.terms)
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum RecurrenceClass {
    Recurrent,
    Transient,
    Indeterminate(Enc),
}

/// First-return loop series at `v`, one enclosure per length up to `n_max`.
///
/// Exact (up to rounding) for explicit finite graphs and chain extensions via
/// powers of the matrix restricted to the complement of `v`; pipeline graphs
/// supply closed-form loop counts and a certified tail. The tail for finite
/// graphs comes from a contraction certificate on the restricted matrix and
/// is `[0, inf]` when none exists.
pub fn simple_loops(
    g: &GraphView,
    v: VertexId,
    beta: f64,
    n_max: usize,
    budget: &SeriesBudget,
) -> Result<LoopSeries> {
    assert!(n_max >= 1);
    if let Some((built, removed)) = g.built_parts() {
        if v != 0 {
            return Err(Error::Precondition(
                "pipeline loop data is available at the base vertex only".into(),
            ));
        }
        let (terms, tail) = built.loop_series(beta, n_max, !removed)?;
        return Ok(LoopSeries {
            base: v,
            beta,
            terms,
            tail,
        });
    }
    if let GraphInner::Chain { core, .. } = &g.inner {
        if (v as usize) >= core.len() {
            // Chain vertices lie on no loop.
            return Ok(LoopSeries {
                base: v,
                beta,
                terms: vec![Enc::ZERO; n_max],
                tail: Enc::ZERO,
            });
        }
    }
    let finite = finite_loop_part(g, v)?;
    let slice = build_slice(&finite, &all_vertices(&finite), beta, budget)?;
    let iv = *slice
        .index
        .get(&v)
        .ok_or(Error::UnknownVertex(v))?;
    let n = slice.verts.len();
    let mut terms = Vec::with_capacity(n_max);
    // l^1 is the diagonal entry.
    let l1 = slice
        .rows[iv]
        .iter()
        .find(|&&(j, _)| j == iv)
        .map(|&(_, w)| w)
        .unwrap_or(Enc::ZERO);
    terms.push(l1);
    // x_k carries the weights of paths from v of length k avoiding v;
    // closing with an edge into v yields l^{k+1}.
    let mut x = vec![Enc::ZERO; n];
    for &(j, ref w) in &slice.rows[iv] {
        if j != iv {
            x[j] = x[j].add(w);
        }
    }
    for _ in 2..=n_max {
        let mut close = Enc::ZERO;
        for (u, xu) in x.iter().enumerate() {
            if xu.hi == 0.0 {
                continue;
            }
            if let Some(&(_, ref w)) = slice.rows[u].iter().find(|&&(j, _)| j == iv) {
                close = close.add(&xu.mul(w));
            }
        }
        terms.push(close);
        let mut next = vec![Enc::ZERO; n];
        for (u, xu) in x.iter().enumerate() {
            if xu.hi == 0.0 {
                continue;
            }
            for &(j, ref w) in &slice.rows[u] {
                if j != iv {
                    next[j] = next[j].add(&xu.mul(w));
                }
            }
        }
        x = next;
    }
    let tail = if slice.lossy {
        Enc::UNKNOWN
    } else {
        restricted_tail(&finite, v, beta, n_max, budget)?
    };
    let terms = if slice.lossy {
        terms
            .into_iter()
            .map(|t| Enc::new(t.lo, f64::INFINITY))
            .collect()
    } else {
        terms
    };
    Ok(LoopSeries {
        base: v,
        beta,
        terms,
        tail,
    })
}

/// Loops of a chain extension live entirely in the core (the chain never
/// returns), so loop analysis reduces to a finite explicit graph.
fn finite_loop_part(g: &GraphView, _v: VertexId) -> Result<GraphView> {
    match &g.inner {
        GraphInner::Explicit(_) => Ok(g.clone()),
        GraphInner::Chain { core, .. } => Ok(GraphView::from_explicit(core.clone())),
        GraphInner::Built { .. } => unreachable!("handled by caller"),
    }
}

fn all_vertices(g: &GraphView) -> BTreeSet<VertexId> {
    (0..g.vertex_count().unwrap() as VertexId).collect()
}

/// Tail bound for l^n past `n_max` via a contraction certificate on the
/// matrix restricted to the complement of `v`: if (B c) <= r c there, then
/// l^n <= alpha gamma r^{n-2} with alpha scaling the departure row into c and
/// gamma the weighted return column.
fn restricted_tail(
    g: &GraphView,
    v: VertexId,
    beta: f64,
    n_max: usize,
    budget: &SeriesBudget,
) -> Result<Enc> {
    let mut rest = all_vertices(g);
    rest.remove(&v);
    if rest.is_empty() {
        return Ok(Enc::ZERO);
    }
    let sub = build_slice(g, &rest, beta, budget)?;
    let full = build_slice(g, &all_vertices(g), beta, budget)?;
    let iv = full.index[&v];
    let (r, c) = match sub.contraction() {
        Some(rc) => rc,
        None => return Ok(Enc::UNKNOWN),
    };
    // alpha: departure row of v against c; gamma: return weights into v.
    let mut alpha = 0.0f64;
    let mut gamma = Enc::ZERO;
    for &(j, ref w) in &full.rows[iv] {
        if j == iv {
            continue;
        }
        let u = full.verts[j];
        let cu = c[sub.index[&u]];
        alpha = alpha.max((w.hi / cu).next_up());
    }
    for &u in &sub.verts {
        let iu = full.index[&u];
        if let Some(&(_, ref w)) = full.rows[iu].iter().find(|&&(j, _)| j == iv) {
            gamma = gamma.add(&w.mul(&Enc::exact(c[sub.index[&u]])));
        }
    }
    if r >= 1.0 || !alpha.is_finite() || !gamma.is_finite() {
        return Ok(Enc::UNKNOWN);
    }
    let rr = Enc::new(0.0, r);
    // sum_{n > n_max} alpha gamma r^{n-2} = alpha gamma r^{n_max - 1}/(1 - r).
    let tail = rr
        .pow(n_max as u32 - 1)
        .mul(&rr.geometric_total().unwrap())
        .mul(&gamma)
        .scale(alpha);
    Ok(Enc::new(0.0, tail.hi))
}

/// Exact simple-loop counts at `v` for explicit finite graphs with F = 1 on
/// every edge (restricted adjacency powers over big integers).
pub fn simple_loop_counts(g: &GraphView, v: VertexId, n_max: usize) -> Result<Vec<BigUint>> {
    let gx = g.as_finite()?;
    let n = gx.len();
    let count = |b: &FamilyKind| -> Result<BigUint> {
        match *b {
            FamilyKind::Finite { count, f } if f == 1.0 => Ok(BigUint::from(count)),
            _ => Err(Error::Precondition(
                "exact loop counts need F = 1 finite bundles".into(),
            )),
        }
    };
    let mut adj = vec![vec![BigUint::zero(); n]; n];
    for b in gx.all_bundles() {
        let c = count(&b.family)?;
        adj[b.src as usize][b.dst as usize] += c;
    }
    let iv = v as usize;
    let mut out = Vec::with_capacity(n_max);
    out.push(adj[iv][iv].clone());
    let mut x: Vec<BigUint> = adj[iv].clone();
    x[iv] = BigUint::zero();
    for _ in 2..=n_max {
        let close: BigUint = x.iter().zip(0..n).map(|(xu, u)| xu * &adj[u][iv]).sum();
        out.push(close);
        let mut next = vec![BigUint::zero(); n];
        for (u, xu) in x.iter().enumerate() {
            if xu.is_zero() {
                continue;
            }
            for (j, nj) in next.iter_mut().enumerate() {
                if j != iv && !adj[u][j].is_zero() {
                    *nj += xu * &adj[u][j];
                }
            }
        }
        x = next;
    }
    Ok(out)
}

/// Exact n-step return counts A^n_{vv} for F = 1 explicit graphs.
fn power_counts(g: &GraphView, v: VertexId, n_max: usize) -> Result<Vec<BigUint>> {
    let gx = g.as_finite()?;
    let n = gx.len();
    let mut adj = vec![vec![BigUint::zero(); n]; n];
    for b in gx.all_bundles() {
        match b.family {
            FamilyKind::Finite { count, f } if f == 1.0 => {
                adj[b.src as usize][b.dst as usize] += BigUint::from(count)
            }
            _ => {
                return Err(Error::Precondition(
                    "exact powers need F = 1 finite bundles".into(),
                ))
            }
        }
    }
    let iv = v as usize;
    let mut x: Vec<BigUint> = (0..n)
        .map(|j| if j == iv { BigUint::one() } else { BigUint::zero() })
        .collect();
    let mut out = Vec::with_capacity(n_max);
    for _ in 1..=n_max {
        let mut next = vec![BigUint::zero(); n];
        for (u, xu) in x.iter().enumerate() {
            if xu.is_zero() {
                continue;
            }
            for (j, nj) in next.iter_mut().enumerate() {
                if !adj[u][j].is_zero() {
                    *nj += xu * &adj[u][j];
                }
            }
        }
        x = next;
        out.push(x[iv].clone());
    }
    Ok(out)
}

/// Exact renewal sandwich over rationals:
/// sum_{n<=N} A^n t^n <= sum_{k<=N} (sum_{j<=N} l^j t^j)^k <= sum_{n<=N^2} A^n t^n.
pub fn renewal_check(g: &GraphView, v: VertexId, t: &BigRational, n: usize) -> Result<bool> {
    assert!(n >= 1);
    if t <= &BigRational::zero() {
        return Err(Error::Precondition("t must be positive".into()));
    }
    let loops = simple_loop_counts(g, v, n)?;
    let powers = power_counts(g, v, n * n)?;
    let tp = |k: usize| -> BigRational {
        let mut p = BigRational::one();
        for _ in 0..k {
            p *= t;
        }
        p
    };
    let a_short: BigRational = (1..=n)
        .map(|k| BigRational::from(num_bigint::BigInt::from(powers[k - 1].clone())) * tp(k))
        .sum();
    let a_long: BigRational = (1..=n * n)
        .map(|k| BigRational::from(num_bigint::BigInt::from(powers[k - 1].clone())) * tp(k))
        .sum();
    let l_sum: BigRational = (1..=n)
        .map(|k| BigRational::from(num_bigint::BigInt::from(loops[k - 1].clone())) * tp(k))
        .sum();
    let mut mid = BigRational::zero();
    let mut pw = BigRational::one();
    for _ in 1..=n {
        pw *= &l_sum;
        mid += &pw;
    }
    Ok(a_short <= mid && mid <= a_long)
}

/// Recurrence/transience of `A(beta)` judged at base vertex `v`.
pub fn classify_at(
    g: &GraphView,
    v: VertexId,
    beta: f64,
    budget: &SeriesBudget,
) -> Result<RecurrenceClass> {
    // Pipeline graphs certify their tail exactly at beta >= h, so few terms
    // suffice; going much deeper would exhaust the f64 range of the
    // completion-mass bookkeeping (placements shrink superexponentially).
    let n_max = if g.built_parts().is_some() {
        budget.max_terms.clamp(32, 96)
    } else {
        budget.max_terms.clamp(32, 256)
    };
    let series = simple_loops(g, v, beta, n_max, budget)?;
    let total = series.total();
    let partial = series.partial();
    if total.hi < 1.0 {
        return Ok(RecurrenceClass::Transient);
    }
    if partial.lo >= 1.0 {
        return Ok(RecurrenceClass::Recurrent);
    }
    // Loop sums that equal 1 exactly (a series completed at its entropy) can
    // only be enclosed; accept a thin band under 1 as recurrent when the
    // enclosure reaches 1 from below.
    if total.lo >= 1.0 - CRITICAL_BAND && total.hi >= 1.0 {
        return Ok(RecurrenceClass::Recurrent);
    }
    Ok(RecurrenceClass::Indeterminate(total))
}

/// Recurrence/transience of `A(beta)`, judged at the canonical base vertex.
/// Base-independent for strongly connected graphs.
pub fn classify(g: &GraphView, beta: f64, budget: &SeriesBudget) -> Result<RecurrenceClass> {
    classify_at(g, 0, beta, budget)
}

/// Gurevich entropy `h(G) = log limsup (A^n_{vv})^{1/n}` (unweighted).
///
/// Finite strongly connected graphs get a two-sided eigenvalue enclosure.
/// Pipeline graphs return the declared entropy after verifying the loop-sum
/// certificate at h (sum = 1 for the recurrent stage; 1 - e^{-h} with the
/// base loop removed). Other infinite graphs get a lower bound only.
pub fn gurevich_entropy(g: &GraphView, budget: &SeriesBudget) -> Result<Enc> {
    if let Some((built, removed)) = g.built_parts() {
        let h = built.entropy();
        let n_terms = budget.max_terms.clamp(20, 120);
        let sum = built.loop_sum(h, n_terms, true)?;
        if !(sum.lo <= 1.0 && sum.hi >= 1.0 - CERT_TOL) {
            return Err(Error::CertificateFailed(format!(
                "loop series at declared entropy must reach 1: {sum:?}"
            )));
        }
        if removed {
            let pruned = built.loop_sum(h, n_terms, false)?;
            let expect_hi = 1.0 - exp_enc(-h).lo + CERT_TOL;
            let expect_lo = 1.0 - exp_enc(-h).hi - CERT_TOL;
            if !(pruned.lo <= expect_hi && pruned.hi >= expect_lo) {
                return Err(Error::CertificateFailed(format!(
                    "pruned loop series must enclose 1 - e^-h: {pruned:?}"
                )));
            }
        }
        return Ok(Enc::around(h));
    }
    match &g.inner {
        GraphInner::Explicit(gx) => {
            if !gx.is_strongly_connected() {
                return Err(Error::Precondition(
                    "entropy needs a strongly connected graph".into(),
                ));
            }
            let rho = spectral_radius_enc(g, 0.0, budget)?;
            if rho.hi.is_infinite() {
                return Ok(Enc::new(ln_enc(rho.lo.max(1.0)).lo, f64::INFINITY));
            }
            Ok(Enc::new(
                ln_enc(rho.lo.max(1.0)).lo,
                ln_enc(rho.hi.max(1.0)).hi,
            ))
        }
        GraphInner::Chain { core, .. } => {
            // Loops live in the core, so the core's radius is the true value;
            // reported as a lower bound because the view as a whole is not
            // strongly connected.
            let core_view = GraphView::from_explicit(core.clone());
            let nw = crate::graph::nonwandering_subgraph(&core_view)?;
            if nw.graph.is_empty() {
                return Ok(Enc::new(0.0, f64::INFINITY));
            }
            let sub = GraphView::from_explicit(nw.graph.clone());
            let rho = spectral_radius_enc(&sub, 0.0, budget)?;
            Ok(Enc::new(ln_enc(rho.lo.max(1.0)).lo, f64::INFINITY))
        }
        GraphInner::Built { .. } => unreachable!(),
    }
}

/// Collatz-Wielandt enclosure of the spectral radius of `A(beta)` on a finite
/// explicit graph: for any positive vector x,
/// min_i (Ax)_i/x_i <= rho <= max_i (Ax)_i/x_i.
fn spectral_radius_enc(g: &GraphView, beta: f64, budget: &SeriesBudget) -> Result<Enc> {
    let slice = build_slice(g, &all_vertices(g), beta, budget)?;
    if slice.rows.iter().flatten().any(|(_, w)| !w.is_finite()) {
        return Ok(Enc::new(0.0, f64::INFINITY));
    }
    let n = slice.verts.len();
    let mut x = vec![1.0f64; n];
    for _ in 0..600 {
        let mut y = vec![0.0f64; n];
        for (i, row) in slice.rows.iter().enumerate() {
            for &(j, ref w) in row {
                y[i] += w.hi * x[j];
            }
        }
        let m = y.iter().cloned().fold(0.0f64, f64::max);
        if m == 0.0 {
            return Ok(Enc::ZERO);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / m;
        }
    }
    let floor = x.iter().cloned().fold(0.0f64, f64::max) * 1e-12;
    for xi in x.iter_mut() {
        *xi = xi.max(floor.max(f64::MIN_POSITIVE));
    }
    let xe: Vec<Enc> = x.iter().map(|&v| Enc::exact(v)).collect();
    let y = slice.apply(&xe);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        lo = lo.min((y[i].lo / x[i]).next_down());
        hi = hi.max((y[i].hi / x[i]).next_up());
    }
    Ok(Enc::new(lo.max(0.0), hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FMode {
    /// F = 1 on every edge: pressure is h(G) - beta.
    Gauge,
    /// General weights: limsup estimated from matrix powers.
    General,
}

/// Signed interval (pressure values can be negative).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedEnc {
    pub lo: f64,
    pub hi: f64,
}

impl SignedEnc {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Pressure `P(-beta F) = log limsup (A(beta)^n_{vv})^{1/n}`.
pub fn pressure(
    g: &GraphView,
    mode: FMode,
    beta: f64,
    budget: &SeriesBudget,
) -> Result<SignedEnc> {
    match mode {
        FMode::Gauge => {
            let h = gurevich_entropy(g, budget)?;
            Ok(SignedEnc {
                lo: (h.lo - beta).next_down(),
                hi: (h.hi - beta).next_up(),
            })
        }
        FMode::General => {
            let mut lo = f64::NEG_INFINITY;
            // Each (1/n) log A^n_{vv} certifies a lower bound of the limsup
            // (supermultiplicativity along multiples of n).
            for n in [4u32, 8, 12, 20, 32] {
                let p = crate::series::power_entry(g, beta, n, 0, 0, budget)?;
                if p.lo > 0.0 {
                    lo = lo.max((p.lo.ln() / n as f64).next_down());
                }
            }
            let hi = if g.is_finite() {
                let rho = spectral_radius_enc(g, beta, budget)?;
                if rho.hi.is_infinite() || rho.hi <= 0.0 {
                    f64::INFINITY
                } else {
                    rho.hi.ln().next_up()
                }
            } else {
                f64::INFINITY
            };
            Ok(SignedEnc { lo, hi })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RuetteStatus {
    RuetteVertex,
    NotRuette(String),
    Indeterminate,
}

/// Checks that `v` carries exactly one length-1 loop and that the loop counts
/// realize the entropy: sum_n l^n e^{-n h} = 1 (within tolerance, partial
/// sums from below). Graphs consisting of a single loop are rejected as
/// degenerate.
pub fn ruette_check(g: &GraphView, v: VertexId, budget: &SeriesBudget) -> Result<RuetteStatus> {
    let (h, l1, series): (f64, BigUint, LoopSeries) =
        if let Some((built, removed)) = g.built_parts() {
            if v != 0 {
                return Err(Error::Precondition("base vertex expected".into()));
            }
            let h = built.entropy();
            let l1 = built.loop_count(1, !removed)?;
            let n_terms = budget.max_terms.clamp(20, 120);
            let series = simple_loops(g, v, h, n_terms, budget)?;
            (h, l1, series)
        } else {
            let h_enc = gurevich_entropy(g, budget)?;
            if h_enc.hi.is_infinite() {
                return Ok(RuetteStatus::Indeterminate);
            }
            let h = h_enc.mid();
            let counts = simple_loop_counts(g, v, 1)?;
            let n_terms = budget.max_terms.clamp(32, 256);
            let series = simple_loops(g, v, h, n_terms, budget)?;
            if h_enc.hi < 1e-9 {
                return Ok(RuetteStatus::NotRuette(
                    "entropy 0: graph is a single loop".into(),
                ));
            }
            (h, counts[0].clone(), series)
        };
    if l1 != BigUint::one() {
        return Ok(RuetteStatus::NotRuette(format!(
            "vertex carries {l1} length-1 loops, need exactly 1"
        )));
    }
    if h <= 1e-9 {
        return Ok(RuetteStatus::NotRuette(
            "entropy 0: graph is a single loop".into(),
        ));
    }
    let total = series.total();
    let partial = series.partial();
    if partial.lo > 1.0 + CERT_TOL {
        return Ok(RuetteStatus::NotRuette(format!(
            "loop series at entropy exceeds 1: {partial:?}"
        )));
    }
    if total.hi < 1.0 - CERT_TOL {
        return Ok(RuetteStatus::NotRuette(format!(
            "loop series at entropy stays below 1: {total:?}"
        )));
    }
    if total.lo >= 1.0 - CERT_TOL && total.hi >= 1.0 - CERT_TOL {
        Ok(RuetteStatus::RuetteVertex)
    } else {
        Ok(RuetteStatus::Indeterminate)
    }
}

/// Removes the unique length-1 loop at a verified base vertex. The result is
/// transient at beta = h with loop sum 1 - e^{-h}.
pub fn remove_ruette_loop(g: &GraphView, v: VertexId) -> Result<GraphView> {
    let budget = SeriesBudget::default();
    match ruette_check(g, v, &budget)? {
        RuetteStatus::RuetteVertex => {}
        other => {
            return Err(Error::Precondition(format!(
                "vertex is not a verified Ruette vertex: {other:?}"
            )))
        }
    }
    if let Some((built, removed)) = g.built_parts() {
        if removed {
            return Err(Error::Precondition("length-1 loop already removed".into()));
        }
        return Ok(GraphView::from_built(built.clone(), true));
    }
    let gx = g.as_finite()?;
    let mut out = ExplicitGraph::new(gx.len());
    for u in 0..gx.len() as VertexId {
        if let Some(l) = gx.label(u) {
            out.set_label(u, l);
        }
    }
    let mut dropped = false;
    for b in gx.all_bundles() {
        if !dropped && b.src == v && b.dst == v {
            if let FamilyKind::Finite { count, f } = b.family {
                if count >= 1 {
                    dropped = true;
                    if count > 1 {
                        out.add_edge(v, v, count - 1, f);
                    }
                    continue;
                }
            }
        }
        out.add_bundle(b.clone());
    }
    if !dropped {
        return Err(Error::Precondition("no length-1 loop to remove".into()));
    }
    let mut view = GraphView::from_explicit(out);
    view.declared_exits = g.declared_exits.clone();
    view.declared_entropy = g.declared_entropy;
    Ok(view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::built::{AttachmentSpec, BuiltGraph, Stage};
    use crate::construct::intervals::TripleRule;
    use num_bigint::BigInt;
    use std::sync::Arc;

    fn budget() -> SeriesBudget {
        SeriesBudget::default()
    }

    fn two_self_loops() -> GraphView {
        let mut g = ExplicitGraph::new(1);
        g.add_edge(0, 0, 2, 1.0);
        GraphView::from_explicit(g)
    }

    /// Two vertices, power-law loop families (weights j^{-beta}, j >= 2) at
    /// each, unit-weight connectors both ways.
    fn power_law_pair() -> GraphView {
        let mut g = ExplicitGraph::new(2);
        for v in 0..2 {
            g.add_bundle(crate::graph::EdgeBundle {
                src: v,
                dst: v,
                family: FamilyKind::PowerLaw { offset: 2 },
            });
            g.declare_emitter(v);
        }
        g.add_edge(0, 1, 1, 1.0);
        g.add_edge(1, 0, 1, 1.0);
        GraphView::from_explicit(g)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn loops_of_two_self_loops() {
        let g = two_self_loops();
        let beta = std::f64::consts::LN_2;
        let s = simple_loops(&g, 0, beta, 5, &budget()).unwrap();
        assert!(s.terms[0].contains(1.0));
        for t in &s.terms[1..] {
            assert_eq!(*t, Enc::ZERO);
        }
        assert_eq!(s.tail, Enc::ZERO);
    }

    #[test]
    fn loop_series_of_power_law_pair() {
        // l^1 = s(beta), l^2 = e^{-2 beta}, l^n = s^{n-2} e^{-2 beta}.
        let g = power_law_pair();
        let beta = 2.0;
        let s = simple_loops(&g, 0, beta, 6, &budget()).unwrap();
        let zeta = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        let e2 = (-2.0 * beta).exp();
        assert!(s.terms[0].contains(zeta), "{:?}", s.terms[0]);
        assert!(s.terms[1].contains(e2), "{:?}", s.terms[1]);
        assert!(s.terms[3].contains(zeta * zeta * e2), "{:?}", s.terms[3]);
        assert!(s.tail.is_finite(), "tail must certify: {:?}", s.tail);
    }

    #[test]
    fn counts_on_cycle_with_chord() {
        // 3-cycle 0->1->2->0 with chord 1->0.
        let mut g = ExplicitGraph::new(3);
        g.add_edge(0, 1, 1, 1.0);
        g.add_edge(1, 2, 1, 1.0);
        g.add_edge(2, 0, 1, 1.0);
        g.add_edge(1, 0, 1, 1.0);
        let g = GraphView::from_explicit(g);
        let counts = simple_loop_counts(&g, 0, 4).unwrap();
        assert_eq!(counts[0], BigUint::zero());
        assert_eq!(counts[1], BigUint::one()); // 0-1-0
        assert_eq!(counts[2], BigUint::one()); // 0-1-2-0
        assert_eq!(counts[3], BigUint::zero());
    }

    #[test]
    fn renewal_sandwich_small_cases() {
        let g = two_self_loops();
        assert!(renewal_check(&g, 0, &rat(1, 3), 4).unwrap());
        let mut single = ExplicitGraph::new(1);
        single.add_edge(0, 0, 1, 1.0);
        let single = GraphView::from_explicit(single);
        assert!(renewal_check(&single, 0, &rat(1, 2), 3).unwrap());
    }

    #[test]
    fn classify_two_self_loops() {
        let g = two_self_loops();
        let b = budget();
        assert_eq!(
            classify(&g, std::f64::consts::LN_2, &b).unwrap(),
            RecurrenceClass::Recurrent
        );
        assert_eq!(
            classify(&g, std::f64::consts::LN_2 + 0.05, &b).unwrap(),
            RecurrenceClass::Transient
        );
        assert_eq!(classify(&g, 0.3, &b).unwrap(), RecurrenceClass::Recurrent);
    }

    #[test]
    fn classify_power_law_pair_above_critical() {
        let g = power_law_pair();
        assert_eq!(
            classify(&g, 2.0, &budget()).unwrap(),
            RecurrenceClass::Transient
        );
        assert_eq!(
            classify(&g, 1.2, &budget()).unwrap(),
            RecurrenceClass::Recurrent
        );
        // Base independence.
        assert_eq!(
            classify_at(&g, 1, 2.0, &budget()).unwrap(),
            RecurrenceClass::Transient
        );
    }

    #[test]
    fn entropy_of_small_shifts() {
        let b = budget();
        let h2 = gurevich_entropy(&two_self_loops(), &b).unwrap();
        assert!(h2.contains(std::f64::consts::LN_2), "{h2:?}");
        assert!(h2.width() < 1e-9);
        let mut g3 = ExplicitGraph::new(1);
        g3.add_edge(0, 0, 3, 1.0);
        let h3 = gurevich_entropy(&GraphView::from_explicit(g3), &b).unwrap();
        assert!(h3.contains(3.0f64.ln()), "{h3:?}");
    }

    #[test]
    fn pressure_gauge_shift() {
        let b = budget();
        let p = pressure(&two_self_loops(), FMode::Gauge, 2.0, &b).unwrap();
        assert!(p.contains(std::f64::consts::LN_2 - 2.0), "{p:?}");
        let at_h = pressure(&two_self_loops(), FMode::Gauge, std::f64::consts::LN_2, &b).unwrap();
        assert!(at_h.contains(0.0));
        assert!(at_h.hi - at_h.lo < 1e-9);
    }

    #[test]
    fn pressure_general_lower_bounds() {
        let b = budget();
        let p = pressure(&two_self_loops(), FMode::General, 0.2, &b).unwrap();
        assert!(p.lo > 0.0, "{p:?}"); // recurrent side: positive pressure
        let q = pressure(&two_self_loops(), FMode::General, 2.0, &b).unwrap();
        assert!(q.hi < 0.0, "{q:?}"); // transient side: negative pressure
    }

    #[test]
    fn ruette_rejects_multiloop_and_single_cycle() {
        let b = budget();
        assert!(matches!(
            ruette_check(&two_self_loops(), 0, &b).unwrap(),
            RuetteStatus::NotRuette(_)
        ));
        let mut single = ExplicitGraph::new(1);
        single.add_edge(0, 0, 1, 1.0);
        assert!(matches!(
            ruette_check(&GraphView::from_explicit(single), 0, &b).unwrap(),
            RuetteStatus::NotRuette(_)
        ));
    }

    #[test]
    fn pipeline_base_is_ruette_and_loop_removal_certifies() {
        let h = std::f64::consts::LN_2;
        let built = Arc::new(
            BuiltGraph::spine(
                h,
                vec![AttachmentSpec {
                    rule: TripleRule::AllOnes,
                    contact: 1,
                }],
                Stage::Completed,
            )
            .unwrap(),
        );
        let g = GraphView::from_built(built, false);
        let b = budget();
        assert_eq!(ruette_check(&g, 0, &b).unwrap(), RuetteStatus::RuetteVertex);
        assert_eq!(classify(&g, h, &b).unwrap(), RecurrenceClass::Recurrent);
        let h_enc = gurevich_entropy(&g, &b).unwrap();
        assert!(h_enc.contains(h));
        let gp = remove_ruette_loop(&g, 0).unwrap();
        assert_eq!(classify(&gp, h, &b).unwrap(), RecurrenceClass::Transient);
        let s = simple_loops(&gp, 0, h, 60, &b).unwrap();
        let total = s.total();
        assert!(total.contains(1.0 - (-h).exp()), "{total:?}");
        // Entropy survives the removal, certified by the pruned loop sum.
        let h2 = gurevich_entropy(&gp, &b).unwrap();
        assert!(h2.contains(h));
        // A second removal has nothing left to take.
        assert!(remove_ruette_loop(&gp, 0).is_err());
    }
}
