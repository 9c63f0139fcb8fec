//! Vector-level equilibrium machinery: (almost-)harmonic checks, the Riesz
//! decomposition into harmonic part and defect, boundary vectors from Green
//! columns, exit summability and exit-limit vectors, the stochastic edge
//! bridge, and the consolidated per-beta report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::enclosure::{edge_weight, sub_clamped, Enc, SeriesBudget};
use crate::error::{Error, Result};
use crate::graph::{
    is_bare_exit, nonwandering_subgraph, BareStatus, EdgeBundle, ExitKind, ExitSpec, FamilyKind,
    GraphView, VertexClass, VertexId,
};

fn finite_parts(b: &EdgeBundle) -> (u64, f64) {
    match b.family {
        FamilyKind::Finite { count, f } => (count, f),
        _ => unreachable!("infinite families are rejected before bridging"),
    }
}
use crate::series::{build_slice, entry, family_weight, green, power_entry};
use crate::spectrum::{classify, classify_at, simple_loops, RecurrenceClass, CERT_TOL};

/// Tolerance for harmonicity equalities on enclosure midlines.
pub const HARMONIC_TOL: f64 = 1e-9;

/// A non-negative vector materialized on finitely many vertices.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct HarmonicVector {
    pub values: BTreeMap<VertexId, Enc>,
}

impl HarmonicVector {
    pub fn from_values(values: BTreeMap<VertexId, Enc>) -> HarmonicVector {
        HarmonicVector { values }
    }

    pub fn constant(vertices: impl IntoIterator<Item = VertexId>, x: f64) -> HarmonicVector {
        HarmonicVector {
            values: vertices.into_iter().map(|v| (v, Enc::exact(x))).collect(),
        }
    }

    pub fn get(&self, v: VertexId) -> Option<Enc> {
        self.values.get(&v).copied()
    }

    pub fn require(&self, v: VertexId) -> Result<Enc> {
        self.get(v).ok_or(Error::InsufficientSupport(v))
    }

    pub fn support(&self) -> Vec<VertexId> {
        self.values.keys().copied().collect()
    }

    /// Rescales so the entry at `base` is 1 (division by its enclosure).
    pub fn normalized(&self, base: VertexId) -> Result<HarmonicVector> {
        let b = self.require(base)?;
        if b.lo <= 0.0 {
            return Err(Error::NotHarmonic(format!(
                "cannot normalize at vertex {base}: value not certified positive"
            )));
        }
        Ok(HarmonicVector {
            values: self
                .values
                .iter()
                .map(|(&v, e)| (v, e.div(&b)))
                .collect(),
        })
    }
}

/// The harmonic part and the defect of a super-harmonic vector.
#[derive(Clone, Debug)]
pub struct RieszParts {
    pub h: HarmonicVector,
    pub k: HarmonicVector,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlmostHarmonicReport {
    Harmonic,
    /// Strict inequality certified exactly at these vertices, all of which
    /// are sinks or infinite emitters.
    AlmostHarmonic { defect_support: Vec<VertexId> },
    /// Witness vertex where the defining inequalities certifiably fail.
    NotAlmostHarmonic { witness: VertexId },
    Indeterminate,
}

/// Enclosure of the weighted row sum `sum_w A(beta)_{vw} psi_w`, plus a flag
/// for whether the out-neighborhood was fully enumerated.
fn row_sum(
    g: &GraphView,
    beta: f64,
    v: VertexId,
    psi: &HarmonicVector,
    budget: &SeriesBudget,
) -> Result<(Enc, bool)> {
    let (bundles, complete) = g.out_bundles(v, budget.max_terms.clamp(64, 1024))?;
    let mut by_dst: BTreeMap<VertexId, Enc> = BTreeMap::new();
    for b in &bundles {
        let w = family_weight(&b.family, beta, budget)?;
        let slot = by_dst.entry(b.dst).or_insert(Enc::ZERO);
        *slot = slot.add(&w);
    }
    let mut sum = Enc::ZERO;
    for (dst, w) in by_dst {
        sum = sum.add(&w.mul(&psi.require(dst)?));
    }
    if !complete {
        sum = Enc::new(sum.lo, f64::INFINITY);
    }
    Ok((sum, complete))
}

fn in_v_infinity(g: &GraphView, v: VertexId) -> bool {
    matches!(
        g.classify_vertex(v, 64),
        Ok(VertexClass::Sink | VertexClass::InfiniteEmitter)
    )
}

/// Checks `sum_w A(beta)_{vw} psi_w <= psi_v` over the horizon, with
/// equality required wherever `v` is neither a sink nor an infinite emitter.
pub fn almost_harmonic_check(
    g: &GraphView,
    beta: f64,
    psi: &HarmonicVector,
    horizon: &[VertexId],
    budget: &SeriesBudget,
) -> Result<AlmostHarmonicReport> {
    let mut defects = Vec::new();
    let mut undecided = false;
    for &v in horizon {
        let pv = psi.require(v)?;
        let (row, _) = row_sum(g, beta, v, psi, budget)?;
        if row.lo > pv.hi + HARMONIC_TOL {
            return Ok(AlmostHarmonicReport::NotAlmostHarmonic { witness: v });
        }
        let boundary = in_v_infinity(g, v);
        if row.hi < pv.lo - HARMONIC_TOL {
            if boundary {
                defects.push(v);
            } else {
                return Ok(AlmostHarmonicReport::NotAlmostHarmonic { witness: v });
            }
        } else if !row.intersects(&pv) {
            undecided = true;
        }
    }
    if !defects.is_empty() {
        Ok(AlmostHarmonicReport::AlmostHarmonic {
            defect_support: defects,
        })
    } else if undecided {
        Ok(AlmostHarmonicReport::Indeterminate)
    } else {
        Ok(AlmostHarmonicReport::Harmonic)
    }
}

/// Splits a super-harmonic psi on a finite graph as `psi = h + sum_n A^n k`
/// with `k = psi - A psi` and h harmonic.
pub fn riesz_decompose(
    g: &GraphView,
    beta: f64,
    psi: &HarmonicVector,
    budget: &SeriesBudget,
) -> Result<RieszParts> {
    let verts: BTreeSet<VertexId> = match g.vertex_count() {
        Some(n) => (0..n as VertexId).collect(),
        None => {
            return Err(Error::Precondition(
                "decomposition requires a finite graph".into(),
            ))
        }
    };
    let slice = build_slice(g, &verts, beta, budget)?;
    let p: Vec<Enc> = slice
        .verts
        .iter()
        .map(|&v| psi.require(v))
        .collect::<Result<_>>()?;
    let row = slice.apply_col(&p);
    let mut k = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        if row[i].lo > p[i].hi + HARMONIC_TOL {
            return Err(Error::NotSuperHarmonic(slice.verts[i]));
        }
        k.push(sub_clamped(&p[i], &row[i]));
    }
    // Resolvent sum S = sum_{n=0}^{N} A^n k, with a geometric tail from a
    // contraction certificate when one exists.
    let mut x = k.clone();
    let mut s = k.clone();
    let n_terms = budget.max_terms.clamp(32, 4096);
    for _ in 0..n_terms {
        if x.iter().all(|e| e.hi < 1e-300) {
            break;
        }
        x = slice.apply_col(&x);
        for i in 0..s.len() {
            s[i] = s[i].add(&x[i]);
        }
    }
    let dead = x.iter().all(|e| e.hi < 1e-300);
    if !dead {
        match slice.contraction() {
            Some((r, c)) => {
                let m = x
                    .iter()
                    .zip(&c)
                    .map(|(e, ci)| e.hi / ci)
                    .fold(0.0f64, f64::max);
                let factor = (m * r / (1.0 - r)).next_up();
                for i in 0..s.len() {
                    s[i] = s[i].add(&Enc::new(0.0, (factor * c[i]).next_up()));
                }
            }
            None => {
                for e in s.iter_mut() {
                    *e = Enc::new(e.lo, f64::INFINITY);
                }
            }
        }
    }
    let mut h = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        h.push(sub_clamped(&p[i], &s[i]));
    }
    // h must be harmonic and h + S must still cover psi.
    let row_h = slice.apply_col(&h);
    for i in 0..h.len() {
        if !row_h[i].intersects(&Enc::new(
            (h[i].lo - HARMONIC_TOL).max(0.0),
            h[i].hi + HARMONIC_TOL,
        )) {
            return Err(Error::CertificateFailed(format!(
                "harmonic part fails harmonicity at vertex {}",
                slice.verts[i]
            )));
        }
        let rebuilt = h[i].add(&s[i]);
        if !rebuilt.intersects(&Enc::new(
            (p[i].lo - HARMONIC_TOL).max(0.0),
            p[i].hi + HARMONIC_TOL,
        )) {
            return Err(Error::CertificateFailed(format!(
                "reconstruction misses the input at vertex {}",
                slice.verts[i]
            )));
        }
    }
    let pack = |vals: Vec<Enc>| HarmonicVector {
        values: slice.verts.iter().copied().zip(vals).collect(),
    };
    Ok(RieszParts {
        h: pack(h),
        k: pack(k),
    })
}

#[derive(Clone, Debug)]
pub enum BoundaryOutcome {
    Vector(HarmonicVector),
    NotSummable,
    Indeterminate,
}

/// The Green column into a sink or infinite emitter, the vector shadow of
/// the boundary ray it induces: psi_w = sum_n A(beta)^n_{w, target}.
pub fn boundary_vector(
    g: &GraphView,
    beta: f64,
    target: VertexId,
    horizon: &[VertexId],
    budget: &SeriesBudget,
) -> Result<BoundaryOutcome> {
    if !in_v_infinity(g, target) {
        return Err(Error::Precondition(format!(
            "vertex {target} is neither a sink nor an infinite emitter"
        )));
    }
    let gtt = green(g, beta, target, target, budget)?;
    if !gtt.hi.is_finite() {
        // The self-column alone is inconclusive; fall back to the loop
        // classification at the target.
        let rec = if g.built_parts().is_some() {
            classify(g, beta, budget)?
        } else {
            classify_at(g, target, beta, budget)?
        };
        match rec {
            RecurrenceClass::Recurrent => return Ok(BoundaryOutcome::NotSummable),
            RecurrenceClass::Indeterminate(_) => return Ok(BoundaryOutcome::Indeterminate),
            RecurrenceClass::Transient => {}
        }
    }
    let mut values = BTreeMap::new();
    values.insert(target, gtt);
    for &w in horizon {
        if w != target {
            values.insert(w, green(g, beta, w, target, budget)?);
        }
    }
    Ok(BoundaryOutcome::Vector(HarmonicVector { values }))
}

#[derive(Clone, Debug)]
pub enum Summability {
    Summable(Enc),
    NotSummable,
    Indeterminate,
}

/// Product of the A(beta) entries along the exit prefix t_1 .. t_k.
fn step_product(
    g: &GraphView,
    beta: f64,
    exit: &ExitSpec,
    k: usize,
    budget: &SeriesBudget,
) -> Result<Enc> {
    let mut prod = Enc::ONE;
    for i in 0..k.saturating_sub(1) {
        let a = g.exit_vertex(exit, i)?;
        let b = g.exit_vertex(exit, i + 1)?;
        prod = prod.mul(&entry(g, beta, a, b, budget)?);
    }
    Ok(prod)
}

/// Decides whether the normalized Green sequence
/// `m_k = t^beta(k)^{-1} green(t_1, t_k)` has a finite limit.
///
/// Constructed graphs get the closed-form route: the limit is
/// `green(t_1,t_1) * sup_k (x_k + y_k)` and finiteness of the suprema is the
/// certified series-membership test of the attachment's interval. Bare and
/// eventually bare exits have constant tails, so the limit is an explicit
/// Green value. Anything else is only decidable to a horizon and reports
/// Indeterminate.
pub fn exit_summability(
    g: &GraphView,
    beta: f64,
    exit: &ExitSpec,
    budget: &SeriesBudget,
) -> Result<Summability> {
    let t1 = g.exit_vertex(exit, 0)?;
    let rec = if g.built_parts().is_some() {
        classify(g, beta, budget)?
    } else {
        classify_at(g, t1, beta, budget)?
    };
    match rec {
        RecurrenceClass::Recurrent => return Ok(Summability::NotSummable),
        RecurrenceClass::Indeterminate(_) => return Ok(Summability::Indeterminate),
        RecurrenceClass::Transient => {}
    }
    if let Some((built, _)) = g.built_parts().map(|(b, r)| (b.clone(), r)) {
        match &exit.kind {
            ExitKind::Backbone => {
                // All simple paths from the base along the spine are the
                // spine run itself, so the limit collapses to the base Green
                // value.
                return Ok(Summability::Summable(green(g, beta, 0, 0, budget)?));
            }
            ExitKind::Attachment { index } => {
                let membership = built.with_triple(*index, |tr| {
                    crate::construct::intervals::j_membership(
                        tr,
                        beta,
                        budget.max_terms.clamp(48, 512),
                    )
                })?;
                use crate::construct::built::Shape;
                use crate::construct::intervals::Membership;
                return Ok(match membership {
                    Membership::Member { b_sum, c_sum } => {
                        let alpha = green(g, beta, t1, t1, budget)?;
                        let (x, y) = match built.shape() {
                            Shape::Spine => (Enc::ONE.add(&c_sum), b_sum),
                            Shape::StarCore { .. } => {
                                let c1 = crate::construct::intervals::biguint_enc(
                                    &built.with_triple(*index, |tr| tr.c(1)),
                                );
                                let inv = Enc::ONE.div(&c1);
                                (
                                    inv.mul(
                                        &Enc::ONE
                                            .add(&edge_weight(beta, 1.0).mul(&c_sum)),
                                    ),
                                    inv.mul(&edge_weight(beta, 2.0).mul(&b_sum)),
                                )
                            }
                        };
                        Summability::Summable(alpha.mul(&x.add(&y)))
                    }
                    Membership::NotMember { .. } => Summability::NotSummable,
                    Membership::Indeterminate => Summability::Indeterminate,
                });
            }
            ExitKind::Explicit { .. } => {}
        }
    }
    match is_bare_exit(g, exit, 48)? {
        BareStatus::Bare => Ok(Summability::Summable(green(g, beta, t1, t1, budget)?)),
        BareStatus::EventuallyBare { from } => {
            let tk = g.exit_vertex(exit, from - 1)?;
            let scale = step_product(g, beta, exit, from, budget)?;
            let limit = green(g, beta, t1, tk, budget)?.div(&scale);
            Ok(Summability::Summable(limit))
        }
        BareStatus::NotBareWithin { .. } => Ok(Summability::Indeterminate),
    }
}

/// The exit-limit vector `psi_v = lim_k t^beta(k)^{-1} green(v, t_k)` on the
/// horizon of a summable exit.
pub fn exit_harmonic_vector(
    g: &GraphView,
    beta: f64,
    exit: &ExitSpec,
    horizon: &[VertexId],
    budget: &SeriesBudget,
) -> Result<HarmonicVector> {
    match exit_summability(g, beta, exit, budget)? {
        Summability::Summable(_) => {}
        _ => {
            return Err(Error::Precondition(
                "exit is not certified summable at this beta".into(),
            ))
        }
    }
    let t1 = g.exit_vertex(exit, 0)?;
    // Past this prefix index the normalized sequence is constant (bare tail)
    // or monotone from below (general tail).
    let (k0, exact) = match is_bare_exit(g, exit, 48) {
        Ok(BareStatus::Bare) => (8usize, true),
        Ok(BareStatus::EventuallyBare { from }) => (from.max(8), true),
        _ => (12usize, false),
    };
    let tk = g.exit_vertex(exit, k0 - 1)?;
    let scale = step_product(g, beta, exit, k0, budget)?;
    let mut values = BTreeMap::new();
    for &v in horizon {
        let m = green(g, beta, v, tk, budget)?.div(&scale);
        values.insert(v, if exact { m } else { Enc::new(m.lo, f64::INFINITY) });
    }
    let psi = HarmonicVector { values };
    let p1 = psi.require(t1)?;
    if p1.hi < 1.0 - CERT_TOL {
        return Err(Error::CertificateFailed(format!(
            "exit vector is below 1 at its first vertex: [{}, {}]",
            p1.lo, p1.hi
        )));
    }
    Ok(psi)
}

/// The stochastic bridge over a finite graph: per-edge transition values
/// `B_{e0 e1} = psi_{r(e0)}^{-1} psi_{r(e1)} e^{-beta F(e1)}` for
/// consecutive edges, with rows summing to one when psi is harmonic.
#[derive(Clone, Debug)]
pub struct MarkovBridge {
    pub beta: f64,
    pub bundles: Vec<EdgeBundle>,
    pub psi: HarmonicVector,
}

pub fn markov_bridge(g: &GraphView, beta: f64, psi: &HarmonicVector) -> Result<MarkovBridge> {
    let fin = g.as_finite()?;
    if fin.all_bundles().any(|b| b.family.is_infinite()) {
        return Err(Error::Precondition(
            "bridge requires finitely many edges".into(),
        ));
    }
    let budget = SeriesBudget::default();
    for v in 0..fin.len() as VertexId {
        let pv = psi.require(v)?;
        if pv.lo <= 0.0 {
            return Err(Error::NotHarmonic(format!(
                "psi must be strictly positive; vertex {v} is not"
            )));
        }
    }
    let horizon: Vec<VertexId> = (0..fin.len() as VertexId).collect();
    match almost_harmonic_check(g, beta, psi, &horizon, &budget)? {
        AlmostHarmonicReport::Harmonic | AlmostHarmonicReport::Indeterminate => {}
        AlmostHarmonicReport::AlmostHarmonic { defect_support } => {
            return Err(Error::NotHarmonic(format!(
                "psi has defects at {defect_support:?}"
            )))
        }
        AlmostHarmonicReport::NotAlmostHarmonic { witness } => {
            return Err(Error::NotHarmonic(format!(
                "inequality fails at vertex {witness}"
            )))
        }
    }
    Ok(MarkovBridge {
        beta,
        bundles: fin.all_bundles().cloned().collect(),
        psi: psi.clone(),
    })
}

impl MarkovBridge {
    pub fn edge_bundle_count(&self) -> usize {
        self.bundles.len()
    }

    /// Per-edge transition value between bundle `i` and bundle `j`; zero
    /// unless the edges are composable.
    pub fn entry(&self, i: usize, j: usize) -> Enc {
        let (b0, b1) = (&self.bundles[i], &self.bundles[j]);
        if b0.dst != b1.src {
            return Enc::ZERO;
        }
        let p0 = self.psi.get(b0.dst).unwrap_or(Enc::ZERO);
        let p1 = self.psi.get(b1.dst).unwrap_or(Enc::ZERO);
        p1.div(&p0).mul(&edge_weight(self.beta, finite_parts(b1).1))
    }

    /// Row sum over all edges leaving the range of bundle `i`.
    pub fn row_sum(&self, i: usize) -> Enc {
        let mut s = Enc::ZERO;
        for j in 0..self.bundles.len() {
            s = s.add(&self.entry(i, j).scale(finite_parts(&self.bundles[j]).0 as f64));
        }
        s
    }

    /// Verifies `B^n_{e f} = psi_{r(e)}^{-1} psi_{r(f)} e^{-beta F(f)}
    /// A(beta)^{n-1}_{r(e) s(f)}` for every composable pair, within
    /// enclosures.
    pub fn power_identity_check(
        &self,
        g: &GraphView,
        n: u32,
        budget: &SeriesBudget,
    ) -> Result<bool> {
        if n == 0 {
            return Err(Error::Precondition("identity needs n >= 1".into()));
        }
        let m = self.bundles.len();
        for e in 0..m {
            // x_j = B^k_{e, j} with intermediate multiplicities folded in.
            let mut x: Vec<Enc> = (0..m).map(|j| self.entry(e, j)).collect();
            for _ in 1..n {
                let mut next = vec![Enc::ZERO; m];
                for (j, nj) in next.iter_mut().enumerate() {
                    for (i, xi) in x.iter().enumerate() {
                        if xi.hi == 0.0 {
                            continue;
                        }
                        *nj = nj.add(
                            &xi.scale(finite_parts(&self.bundles[i]).0 as f64)
                                .mul(&self.entry(i, j)),
                        );
                    }
                }
                x = next;
            }
            for (f, xf) in x.iter().enumerate() {
                let b0 = &self.bundles[e];
                let b1 = &self.bundles[f];
                let a = power_entry(g, self.beta, n - 1, b0.dst, b1.src, budget)?;
                let rhs = self
                    .psi
                    .get(b1.dst)
                    .unwrap_or(Enc::ZERO)
                    .div(&self.psi.get(b0.dst).unwrap_or(Enc::ZERO))
                    .mul(&edge_weight(self.beta, finite_parts(b1).1))
                    .mul(&a);
                let widened = Enc::new((rhs.lo - HARMONIC_TOL).max(0.0), rhs.hi + HARMONIC_TOL);
                if !xf.intersects(&widened) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exists {
    Yes,
    No,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RaySource {
    /// The single ray of a recurrent graph (finite-section approximation,
    /// not certified).
    UniqueRecurrent,
    Exit(ExitSpec),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureLabel {
    Conservative,
    Dissipative,
    Unknown,
}

/// Everything the analysis derives about equilibrium structure at one beta.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KmsReport {
    pub beta: f64,
    pub exists: Exists,
    pub recurrence: RecurrenceClass,
    pub boundary_rays: Vec<(VertexId, HarmonicVector)>,
    pub harmonic_rays: Vec<(RaySource, HarmonicVector)>,
    /// Rays beyond the enumerated ones may exist (incomplete exit data or a
    /// wandering graph without a sink).
    pub unenumerated_possible: bool,
    /// The recurrent-case ray is a finite-section surrogate, not certified.
    pub approximate: bool,
    pub measure_label: MeasureLabel,
}

/// Finite-section power-iteration surrogate for the unique recurrent ray.
fn perron_ray(g: &GraphView, beta: f64, budget: &SeriesBudget) -> Result<HarmonicVector> {
    let (view, verts): (GraphView, Vec<VertexId>) = match g.vertex_count() {
        Some(n) => (g.clone(), (0..n as VertexId).collect()),
        None => {
            let tr = g.truncate(12, 12)?;
            let n = tr.graph.len() as VertexId;
            (tr.as_view(), (0..n).collect())
        }
    };
    let set: BTreeSet<VertexId> = verts.iter().copied().collect();
    let slice = build_slice(&view, &set, beta, budget)?;
    let n = slice.verts.len();
    let mut c = vec![1.0f64; n];
    for _ in 0..400 {
        let x: Vec<Enc> = c.iter().map(|&v| Enc::exact(v)).collect();
        let y = slice.apply_col(&x);
        let norm = y.iter().map(|e| e.hi).fold(0.0f64, f64::max);
        if norm <= 0.0 || !norm.is_finite() {
            break;
        }
        for i in 0..n {
            c[i] = (y[i].hi / norm).max(1e-12);
        }
    }
    let base = c[0].max(1e-300);
    Ok(HarmonicVector {
        values: slice
            .verts
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, Enc::around(c[i] / base)))
            .collect(),
    })
}

/// The sinks and infinite emitters the enumeration can reach.
fn boundary_candidates(g: &GraphView) -> Vec<VertexId> {
    if let Some((built, _)) = g.built_parts() {
        return built.emitter_vertices(8).unwrap_or_default();
    }
    let probe: Vec<VertexId> = match g.vertex_count() {
        Some(n) => (0..n as VertexId).collect(),
        // Chain extension: only core vertices can be sinks or emitters.
        None => match g.as_finite() {
            _ => (0..64).filter(|&v| g.has_vertex(v)).collect(),
        },
    };
    probe
        .into_iter()
        .filter(|&v| in_v_infinity(g, v))
        .collect()
}

/// Full per-beta enumeration: existence, recurrence, boundary rays from
/// summable sinks/emitters, harmonic rays from summable exits.
pub fn enumerate_kms(g: &GraphView, beta: f64, budget: &SeriesBudget) -> Result<KmsReport> {
    let mut report = KmsReport {
        beta,
        exists: Exists::Indeterminate,
        recurrence: RecurrenceClass::Indeterminate(Enc::UNKNOWN),
        boundary_rays: Vec::new(),
        harmonic_rays: Vec::new(),
        unenumerated_possible: false,
        approximate: false,
        measure_label: MeasureLabel::Unknown,
    };
    // Graphs whose loops all vanish: recurrence theory is vacuous and the
    // boundary carries everything.
    if let Ok(nw) = nonwandering_subgraph(g) {
        if nw.vertices.is_empty() {
            report.recurrence = RecurrenceClass::Transient;
            report.measure_label = MeasureLabel::Dissipative;
            report.exists = Exists::Yes;
            let sinks = boundary_candidates(g);
            if sinks.is_empty() {
                report.unenumerated_possible = true;
            } else {
                let horizon: Vec<VertexId> =
                    (0..g.vertex_count().unwrap_or(0) as VertexId).collect();
                for s in sinks {
                    if let BoundaryOutcome::Vector(v) =
                        boundary_vector(g, beta, s, &horizon, budget)?
                    {
                        report.boundary_rays.push((s, v));
                    }
                }
            }
            return Ok(report);
        }
    }
    let series = simple_loops(g, 0, beta, budget.max_terms.clamp(32, 96), budget)?;
    let partial = series.partial();
    let total = series.total();
    if partial.lo > 1.0 + CERT_TOL {
        // The first-return sum certifiably exceeds 1: positive pressure, no
        // equilibrium weights at this beta.
        report.exists = Exists::No;
        report.recurrence = RecurrenceClass::Recurrent;
        report.measure_label = MeasureLabel::Conservative;
        return Ok(report);
    }
    let rec = classify(g, beta, budget)?;
    report.recurrence = rec.clone();
    match rec {
        RecurrenceClass::Recurrent => {
            report.exists = Exists::Yes;
            report.measure_label = MeasureLabel::Conservative;
            report.approximate = true;
            let ray = perron_ray(g, beta, budget)?;
            report.harmonic_rays.push((RaySource::UniqueRecurrent, ray));
        }
        RecurrenceClass::Transient => {
            // Transience bounds the spectral radius by one, so weights exist.
            report.exists = Exists::Yes;
            report.measure_label = MeasureLabel::Dissipative;
            let horizon: Vec<VertexId> = match g.vertex_count() {
                Some(n) => (0..n as VertexId).collect(),
                None => vec![0],
            };
            for u in boundary_candidates(g) {
                match boundary_vector(g, beta, u, &horizon, budget)? {
                    BoundaryOutcome::Vector(v) => report.boundary_rays.push((u, v)),
                    BoundaryOutcome::NotSummable => {}
                    BoundaryOutcome::Indeterminate => report.unenumerated_possible = true,
                }
            }
            let finite_vertices = g.vertex_count().is_some();
            if !finite_vertices {
                if g.declared_exits.is_empty() {
                    report.unenumerated_possible = true;
                } else {
                    for exit in g.declared_exits.clone() {
                        match exit_summability(g, beta, &exit, budget)? {
                            Summability::Summable(_) => {
                                let t1 = g.exit_vertex(&exit, 0)?;
                                let psi = exit_harmonic_vector(g, beta, &exit, &[t1], budget)
                                    .unwrap_or_default();
                                report.harmonic_rays.push((RaySource::Exit(exit), psi));
                            }
                            Summability::NotSummable => {}
                            Summability::Indeterminate => report.unenumerated_possible = true,
                        }
                    }
                }
            }
        }
        RecurrenceClass::Indeterminate(enc) => {
            // Unable to certify either side; expose the partial sums.
            if !total.hi.is_finite() && partial.lo > 1.0 - CRITICALISH {
                report.exists = Exists::Indeterminate;
            }
            report.recurrence = RecurrenceClass::Indeterminate(enc);
        }
    }
    Ok(report)
}

const CRITICALISH: f64 = 1e-3;
