//! Certified evaluation of weighted path series.
//!
//! `entry` encloses a single matrix entry A(beta)_{vw}, `power_entry` the
//! n-step entry A(beta)^n_{vw}, and `green` the full resolvent-style sum
//! sum_{n >= 0} A(beta)^n_{vw}. Lower bounds are always certified; upper
//! bounds are finite exactly when a tail argument applies (declared family
//! tails, a geometric ratio supplied by the caller, a contraction certificate
//! found on the relevant finite slice, or a renewal closed form on pipeline
//! graphs).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::construct::intervals::biguint_enc;
use crate::enclosure::{edge_weight, powf_enc, Enc, SeriesBudget, TailPolicy};
use crate::error::{Error, Result};
use crate::graph::{FamilyKind, GraphInner, GraphView, VertexId};

/// Hard cap on the support of a forward-propagated vector before giving up.
const SUPPORT_CAP: usize = 200_000;
/// Partial-sum length used for the zeta tails of power-law families.
const ZETA_PARTIAL: u64 = 256;
/// Iteration count of the uncertified power iteration that seeds the
/// contraction certificate (the certificate itself is verified afterwards).
const PERRON_ITERS: usize = 400;

fn count_enc(count: u64) -> Enc {
    if count <= (1u64 << 53) {
        Enc::exact(count as f64)
    } else {
        Enc::around(count as f64)
    }
}

/// Enclosure of the zeta tail `sum_{j >= n0} j^{-beta}` for `beta > 1`,
/// via Euler-Maclaurin with a certified remainder margin.
fn zeta_tail(n0: u64, beta: f64) -> Enc {
    debug_assert!(beta > 1.0 && n0 >= 2);
    let n = n0 as f64;
    let bm1 = Enc::new((beta - 1.0).next_down(), (beta - 1.0).next_up());
    let integral = powf_enc(n, (1.0 - beta).next_down())
        .hull(&powf_enc(n, (1.0 - beta).next_up()))
        .div(&bm1);
    let half_term = powf_enc(n, -beta).scale(0.5);
    let deriv = powf_enc(n, (-beta - 1.0).next_down())
        .hull(&powf_enc(n, (-beta - 1.0).next_up()))
        .mul(&Enc::around(beta))
        .scale(1.0 / 12.0);
    let margin = powf_enc(n, (-beta - 3.0).next_down())
        .hull(&powf_enc(n, (-beta - 3.0).next_up()))
        .mul(&Enc::around(beta * (beta + 1.0) * (beta + 2.0)))
        .scale(4.0 / 720.0);
    let center = integral.add(&half_term).add(&deriv);
    Enc::new((center.lo - margin.hi).max(0.0), center.hi + margin.hi)
}

/// Enclosure of the total weight `sum_e e^{-beta F(e)}` of one bundle.
pub fn family_weight(fam: &FamilyKind, beta: f64, budget: &SeriesBudget) -> Result<Enc> {
    match *fam {
        FamilyKind::Finite { count, f } => Ok(edge_weight(beta, f).mul(&count_enc(count))),
        FamilyKind::PowerLaw { offset } => {
            let offset = offset.max(1) as u64;
            if beta <= 1.0 {
                // Dominates the harmonic series.
                return Ok(Enc::infinite());
            }
            let cut = offset + ZETA_PARTIAL.min(budget.max_terms as u64).max(16);
            let mut partial = Enc::ZERO;
            for j in offset..cut {
                partial = partial.add(&powf_enc(j as f64, -beta));
            }
            let total = partial.add(&zeta_tail(cut, beta));
            match budget.tail_policy {
                TailPolicy::None => Ok(Enc::new(total.lo, f64::INFINITY)),
                _ => Ok(total),
            }
        }
        FamilyKind::Geometric { f0, step } => {
            let head = edge_weight(beta, f0);
            let ratio = edge_weight(beta, step);
            if ratio.lo >= 1.0 {
                return Ok(Enc::infinite());
            }
            match ratio.geometric_total() {
                Some(total) => {
                    let s = head.mul(&total);
                    match budget.tail_policy {
                        TailPolicy::None => Ok(Enc::new(s.lo, f64::INFINITY)),
                        _ => Ok(s),
                    }
                }
                // Ratio enclosure straddles 1: only the head is certain.
                None => Ok(Enc::new(head.lo, f64::INFINITY)),
            }
        }
    }
}

/// Enclosure of the matrix entry `A(beta)_{vw}`.
pub fn entry(
    g: &GraphView,
    beta: f64,
    v: VertexId,
    w: VertexId,
    budget: &SeriesBudget,
) -> Result<Enc> {
    if let Some((built, removed)) = g.built_parts() {
        let mut sum = Enc::ZERO;
        for (count, f) in built.bundles_between(v, w, removed)? {
            sum = sum.add(&biguint_enc(&count).mul(&edge_weight(beta, f)));
        }
        return Ok(sum);
    }
    let (bundles, complete) = g.out_bundles(v, budget.max_terms.max(64))?;
    let mut sum = Enc::ZERO;
    for b in &bundles {
        if b.dst == w {
            sum = sum.add(&family_weight(&b.family, beta, budget)?);
        }
    }
    if complete {
        Ok(sum)
    } else {
        Ok(Enc::new(sum.lo, f64::INFINITY))
    }
}

/// One forward step of the weighted adjacency action: `x -> x A(beta)`.
/// Returns whether any out-stream was only partially enumerated (in which
/// case the result is a lower bound).
fn forward_step(
    g: &GraphView,
    beta: f64,
    x: &BTreeMap<VertexId, Enc>,
    budget: &SeriesBudget,
) -> Result<(BTreeMap<VertexId, Enc>, bool)> {
    let width = budget.max_terms.max(64);
    let mut next: BTreeMap<VertexId, Enc> = BTreeMap::new();
    let mut lossy = false;
    for (&u, mass) in x {
        let (bundles, complete) = g.out_bundles(u, width)?;
        if !complete {
            lossy = true;
        }
        for b in &bundles {
            let wgt = family_weight(&b.family, beta, budget)?;
            let add = mass.mul(&wgt);
            if add.hi == 0.0 {
                continue;
            }
            let slot = next.entry(b.dst).or_insert(Enc::ZERO);
            *slot = slot.add(&add);
        }
        if next.len() > SUPPORT_CAP {
            return Err(Error::BudgetExhausted(Enc::UNKNOWN));
        }
    }
    Ok((next, lossy))
}

/// Enclosure of the n-step entry `A(beta)^n_{vw}`.
pub fn power_entry(
    g: &GraphView,
    beta: f64,
    n: u32,
    v: VertexId,
    w: VertexId,
    budget: &SeriesBudget,
) -> Result<Enc> {
    if !g.has_vertex(v) {
        return Err(Error::UnknownVertex(v));
    }
    if !g.has_vertex(w) {
        return Err(Error::UnknownVertex(w));
    }
    if n == 0 {
        return Ok(if v == w { Enc::ONE } else { Enc::ZERO });
    }
    let mut x = BTreeMap::from([(v, Enc::ONE)]);
    let mut lossy = false;
    for _ in 0..n {
        let (next, l) = forward_step(g, beta, &x, budget)?;
        x = next;
        lossy |= l;
        if x.is_empty() {
            break;
        }
    }
    let r = x.get(&w).copied().unwrap_or(Enc::ZERO);
    if lossy {
        Ok(Enc::new(r.lo, f64::INFINITY))
    } else {
        Ok(r)
    }
}

/// `A(t)^n_{vw}` with an explicit enclosure `t` substituted for `e^{-beta}`.
/// Requires every edge to carry F = 1 (gauge weights), so that the weighted
/// adjacency matrix is polynomial in `t`; used to compare against exact
/// rational path sums.
pub fn power_entry_gauge(
    g: &GraphView,
    t: Enc,
    n: u32,
    v: VertexId,
    w: VertexId,
) -> Result<Enc> {
    if n == 0 {
        return Ok(if v == w { Enc::ONE } else { Enc::ZERO });
    }
    let mut x = BTreeMap::from([(v, Enc::ONE)]);
    for _ in 0..n {
        let mut next: BTreeMap<VertexId, Enc> = BTreeMap::new();
        for (&u, mass) in &x {
            let bundles = g.out_bundles_complete(u)?;
            for b in &bundles {
                let count = match b.family {
                    FamilyKind::Finite { count, f } if f == 1.0 => count,
                    _ => {
                        return Err(Error::Precondition(
                            "gauge-substituted powers need F = 1 edges".into(),
                        ))
                    }
                };
                let add = mass.mul(&t).mul(&count_enc(count));
                let slot = next.entry(b.dst).or_insert(Enc::ZERO);
                *slot = slot.add(&add);
            }
        }
        x = next;
        if x.is_empty() {
            break;
        }
    }
    Ok(x.get(&w).copied().unwrap_or(Enc::ZERO))
}

/// Vertices from which `w` is reachable (including `w`), when that set is
/// finitely computable: always for explicit graphs; for chain extensions the
/// chain is one-way, so the set stays finite.
fn co_reachable(g: &GraphView, w: VertexId) -> Option<BTreeSet<VertexId>> {
    fn core_coreach(core: &crate::graph::ExplicitGraph, w: VertexId) -> BTreeSet<VertexId> {
        let preds = core.predecessor_index();
        let mut set = BTreeSet::from([w]);
        let mut queue = VecDeque::from([w]);
        while let Some(u) = queue.pop_front() {
            for &p in &preds[u as usize] {
                if set.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        set
    }
    match &g.inner {
        GraphInner::Explicit(gx) => Some(core_coreach(gx, w)),
        GraphInner::Chain { core, chain_from } => {
            let n = core.len() as VertexId;
            if w < n {
                Some(core_coreach(core, w))
            } else {
                let mut set = core_coreach(core, *chain_from);
                for u in n..=w {
                    set.insert(u);
                }
                Some(set)
            }
        }
        GraphInner::Built { .. } => None,
    }
}

/// Finite weighted matrix over the given vertex set, entries summed over
/// bundles whose endpoints both lie in the set. Reports whether any
/// out-stream was incompletely enumerated.
pub(crate) struct Slice {
    pub(crate) verts: Vec<VertexId>,
    pub(crate) index: BTreeMap<VertexId, usize>,
    pub(crate) rows: Vec<Vec<(usize, Enc)>>,
    pub(crate) lossy: bool,
}

pub(crate) fn build_slice(
    g: &GraphView,
    set: &BTreeSet<VertexId>,
    beta: f64,
    budget: &SeriesBudget,
) -> Result<Slice> {
    let verts: Vec<VertexId> = set.iter().copied().collect();
    let index: BTreeMap<VertexId, usize> =
        verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut rows = Vec::with_capacity(verts.len());
    let mut lossy = false;
    for &u in &verts {
        let (bundles, complete) = g.out_bundles(u, budget.max_terms.max(64))?;
        if !complete {
            lossy = true;
        }
        let mut row: BTreeMap<usize, Enc> = BTreeMap::new();
        for b in &bundles {
            if let Some(&j) = index.get(&b.dst) {
                let wgt = family_weight(&b.family, beta, budget)?;
                let slot = row.entry(j).or_insert(Enc::ZERO);
                *slot = slot.add(&wgt);
            }
        }
        rows.push(row.into_iter().collect());
    }
    Ok(Slice {
        verts,
        index,
        rows,
        lossy,
    })
}

impl Slice {
    pub(crate) fn apply(&self, x: &[Enc]) -> Vec<Enc> {
        let mut y = vec![Enc::ZERO; x.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if x[i].hi == 0.0 {
                continue;
            }
            for &(j, ref wgt) in row {
                y[j] = y[j].add(&x[i].mul(wgt));
            }
        }
        y
    }

    /// Column action `y_i = sum_j A_{ij} x_j` (apply is the row action).
    pub(crate) fn apply_col(&self, x: &[Enc]) -> Vec<Enc> {
        let mut y = vec![Enc::ZERO; x.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, ref wgt) in row {
                if x[j].hi == 0.0 {
                    continue;
                }
                y[i] = y[i].add(&x[j].mul(wgt));
            }
        }
        y
    }

    /// Searches for a positive vector `c` and ratio `r < 1` with
    /// `(A c)_i <= r c_i` for every row, which bounds
    /// `A^n_{vw} <= r^n c_v / c_w` and hence certifies the geometric tail of
    /// the resolvent sum. Seeded by an uncertified power iteration; the final
    /// inequality is checked with outward rounding.
    pub(crate) fn contraction(&self) -> Option<(f64, Vec<f64>)> {
        let n = self.verts.len();
        if self.rows.iter().flatten().any(|(_, w)| !w.is_finite()) {
            return None;
        }
        // Uncertified right Perron iteration: c approximates the dominant
        // right eigenvector, so (A c)_i / c_i approaches the spectral radius
        // uniformly across rows.
        let mut c = vec![1.0f64; n];
        for _ in 0..PERRON_ITERS {
            let mut y = vec![0.0f64; n];
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, ref wgt) in row {
                    y[i] += c[j] * wgt.hi;
                }
            }
            let m = y.iter().cloned().fold(0.0f64, f64::max);
            if m == 0.0 {
                break;
            }
            for (ci, yi) in c.iter_mut().zip(&y) {
                *ci = yi / m;
            }
        }
        let floor = 1e-9;
        for ci in c.iter_mut() {
            *ci = ci.max(floor);
        }
        let c_enc: Vec<Enc> = c.iter().map(|&x| Enc::exact(x)).collect();
        let mut r = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = Enc::ZERO;
            for &(j, ref wgt) in row {
                acc = acc.add(&wgt.mul(&c_enc[j]));
            }
            r = r.max((acc.hi / c[i]).next_up());
        }
        if r < 1.0 {
            Some((r, c))
        } else {
            None
        }
    }
}

/// Enclosure of the accumulated path series `sum_{n >= 0} A(beta)^n_{vw}`.
///
/// The lower bound is a monotone-certified partial sum. The upper bound is
/// finite when the relevant finite slice admits a contraction certificate
/// (or the caller supplies a geometric ratio), when the reachable slice is
/// loop-free so the sum terminates, or on a completed pipeline graph at the
/// base vertex, where the renewal identity gives a closed form.
pub fn green(
    g: &GraphView,
    beta: f64,
    v: VertexId,
    w: VertexId,
    budget: &SeriesBudget,
) -> Result<Enc> {
    if !g.has_vertex(v) {
        return Err(Error::UnknownVertex(v));
    }
    if !g.has_vertex(w) {
        return Err(Error::UnknownVertex(w));
    }
    if let Some((built, removed)) = g.built_parts() {
        if v == 0 && w == 0 {
            let l = built.loop_sum(beta, budget.max_terms.min(120).max(20), !removed)?;
            return Ok(match l.geometric_total() {
                Some(total) => total,
                None => Enc::new(1.0, f64::INFINITY),
            });
        }
        return green_streamed(g, beta, v, w, budget);
    }
    let co = match co_reachable(g, w) {
        Some(set) => set,
        None => return green_streamed(g, beta, v, w, budget),
    };
    if !co.contains(&v) {
        return Ok(if v == w { Enc::ONE } else { Enc::ZERO });
    }
    // Restrict further to vertices reachable from v: paths v -> w live in the
    // intersection, and the restricted matrix reproduces their weights
    // exactly.
    let mut set = BTreeSet::from([v]);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let (bundles, _) = g.out_bundles(u, budget.max_terms.max(64))?;
        for b in &bundles {
            if co.contains(&b.dst) && set.insert(b.dst) {
                queue.push_back(b.dst);
            }
        }
    }
    let slice = build_slice(g, &set, beta, budget)?;
    let iv = slice.index[&v];
    let iw = match slice.index.get(&w) {
        Some(&i) => i,
        None => return Ok(Enc::ZERO),
    };
    let n_max = budget.max_terms.clamp(32, 4096);
    let mut x = vec![Enc::ZERO; slice.verts.len()];
    x[iv] = Enc::ONE;
    let mut total = if v == w { Enc::ONE } else { Enc::ZERO };
    let mut steps = 0usize;
    let mut died = false;
    while steps < n_max {
        x = slice.apply(&x);
        steps += 1;
        total = total.add(&x[iw]);
        if x.iter().all(|e| e.hi == 0.0) {
            died = true;
            break;
        }
    }
    if died && !slice.lossy {
        return Ok(total);
    }
    if slice.lossy {
        return Ok(Enc::new(total.lo, f64::INFINITY));
    }
    let tail_hi = match budget.tail_policy {
        TailPolicy::None => f64::INFINITY,
        TailPolicy::GeometricRatio(r) => {
            if r < 1.0 {
                let rr = Enc::around(r);
                x[iw].mul(&rr).mul(&rr.geometric_total().unwrap()).hi
            } else {
                f64::INFINITY
            }
        }
        TailPolicy::DeclaredBound => match slice.contraction() {
            Some((r, c)) => {
                let rr = Enc::new(0.0, r);
                let scale = Enc::new(0.0, (c[iv] / c[iw]).next_up());
                rr.pow(steps as u32 + 1)
                    .mul(&rr.geometric_total().unwrap())
                    .mul(&scale)
                    .hi
            }
            None => f64::INFINITY,
        },
    };
    Ok(Enc::new(total.lo, total.hi + tail_hi))
}

/// Budgeted forward accumulation for graphs without a finitely computable
/// co-reachable slice: the lower bound is certified, the upper bound is
/// finite only when the explored cone dies out completely.
fn green_streamed(
    g: &GraphView,
    beta: f64,
    v: VertexId,
    w: VertexId,
    budget: &SeriesBudget,
) -> Result<Enc> {
    // Constructed graphs materialize levels on demand and the cost per level
    // grows quickly; their cones never die out, so the upper bound is already
    // infinite and deep walks only refine the lower bound. Keep those short.
    let n_max = if g.built_parts().is_some() {
        budget.max_terms.clamp(8, 48)
    } else {
        budget.max_terms.clamp(16, 512)
    };
    let mut x = BTreeMap::from([(v, Enc::ONE)]);
    let mut total = if v == w { Enc::ONE } else { Enc::ZERO };
    let mut lossy = false;
    for _ in 0..n_max {
        let (next, l) = forward_step(g, beta, &x, budget)?;
        x = next;
        lossy |= l;
        if let Some(m) = x.get(&w) {
            total = total.add(m);
        }
        if x.is_empty() {
            return Ok(if lossy {
                Enc::new(total.lo, f64::INFINITY)
            } else {
                total
            });
        }
    }
    Ok(Enc::new(total.lo, f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ExplicitGraph;

    fn budget() -> SeriesBudget {
        SeriesBudget::default()
    }

    #[test]
    fn entry_two_self_loops_at_log_two() {
        let mut g = ExplicitGraph::new(1);
        g.add_edge(0, 0, 2, 1.0);
        let g = GraphView::from_explicit(g);
        let e = entry(&g, std::f64::consts::LN_2, 0, 0, &budget()).unwrap();
        assert!(e.contains(1.0));
        assert!(e.width() < 1e-14);
    }

    #[test]
    fn entry_power_law_is_zeta_minus_one() {
        // Edges of weight j^{-beta} for j >= 2: at beta = 2 the total is
        // pi^2/6 - 1.
        let mut g = ExplicitGraph::new(1);
        g.add_bundle(crate::graph::EdgeBundle {
            src: 0,
            dst: 0,
            family: FamilyKind::PowerLaw { offset: 2 },
        });
        let g = GraphView::from_explicit(g);
        let e = entry(&g, 2.0, 0, 0, &budget()).unwrap();
        let expected = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert!(e.width() < 1e-9, "{e:?}");
    }

    #[test]
    fn entry_power_law_diverges_at_one() {
        let mut g = ExplicitGraph::new(1);
        g.add_bundle(crate::graph::EdgeBundle {
            src: 0,
            dst: 0,
            family: FamilyKind::PowerLaw { offset: 2 },
        });
        let g = GraphView::from_explicit(g);
        let e = entry(&g, 1.0, 0, 0, &budget()).unwrap();
        assert!(e.lo.is_infinite());
    }

    #[test]
    fn entry_geometric_closed_form() {
        // F = 1 + i at beta = 1: sum e^{-(1+i)} = e^{-1}/(1 - e^{-1}).
        let mut g = ExplicitGraph::new(1);
        g.add_bundle(crate::graph::EdgeBundle {
            src: 0,
            dst: 0,
            family: FamilyKind::Geometric { f0: 1.0, step: 1.0 },
        });
        let g = GraphView::from_explicit(g);
        let e = entry(&g, 1.0, 0, 0, &budget()).unwrap();
        let expected = (-1.0f64).exp() / (1.0 - (-1.0f64).exp());
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert!(e.width() < 1e-12);
    }

    #[test]
    fn power_entry_path_graph() {
        let mut g = ExplicitGraph::new(3);
        g.add_edge(0, 1, 2, 1.0);
        g.add_edge(1, 2, 3, 1.0);
        let g = GraphView::from_explicit(g);
        let beta = 0.7;
        let e = power_entry(&g, beta, 2, 0, 2, &budget()).unwrap();
        let expected = 6.0 * (-2.0 * beta).exp();
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert_eq!(
            power_entry(&g, beta, 0, 0, 0, &budget()).unwrap(),
            Enc::ONE
        );
        assert_eq!(
            power_entry(&g, beta, 3, 0, 2, &budget()).unwrap(),
            Enc::ZERO
        );
    }

    #[test]
    fn green_single_self_loop() {
        let mut g = ExplicitGraph::new(1);
        g.add_edge(0, 0, 2, 1.0);
        let g = GraphView::from_explicit(g);
        let e = green(&g, 2.0, 0, 0, &budget()).unwrap();
        let expected = 1.0 / (1.0 - 2.0 * (-2.0f64).exp());
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert!(e.width() < 1e-9, "{e:?}");
    }

    #[test]
    fn green_diverges_below_critical() {
        // 2 e^{-beta} >= 1 at beta = ln 2: the sum has no finite bound.
        let mut g = ExplicitGraph::new(1);
        g.add_edge(0, 0, 2, 1.0);
        let g = GraphView::from_explicit(g);
        let e = green(&g, 0.5, 0, 0, &budget()).unwrap();
        assert!(e.hi.is_infinite());
        assert!(e.lo > 100.0);
    }

    #[test]
    fn green_through_transient_pair() {
        // v: self loop + edge to w; w: self loop. green(v, w) =
        // e^{-beta} / (1 - e^{-beta})^2.
        let mut g = ExplicitGraph::new(2);
        g.add_edge(0, 0, 1, 1.0);
        g.add_edge(0, 1, 1, 1.0);
        g.add_edge(1, 1, 1, 1.0);
        let g = GraphView::from_explicit(g);
        let beta = 1.0;
        let e = green(&g, beta, 0, 1, &budget()).unwrap();
        let q = (-beta).exp();
        let expected = q / (1.0 - q).powi(2);
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert!(e.width() < 1e-6, "{e:?}");
    }

    #[test]
    fn green_on_infinite_chain_is_exact() {
        let g = GraphView::backbone();
        let beta = 0.3;
        let e = green(&g, beta, 0, 5, &budget()).unwrap();
        let expected = (-5.0 * beta).exp();
        assert!(e.contains(expected), "{e:?} vs {expected}");
        assert!(e.is_finite());
        // Unreachable direction is exactly zero.
        assert_eq!(green(&g, beta, 5, 0, &budget()).unwrap(), Enc::ZERO);
    }

    #[test]
    fn gauge_substitution_matches_weights() {
        let mut g = ExplicitGraph::new(2);
        g.add_edge(0, 1, 3, 1.0);
        g.add_edge(1, 0, 1, 1.0);
        let g = GraphView::from_explicit(g);
        let t = Enc::exact(0.25);
        let e = power_entry_gauge(&g, t, 2, 0, 0).unwrap();
        assert!(e.contains(3.0 * 0.0625));
    }
}
