//! Lazily materialized synthesis graphs.
//!
//! A [`BuiltGraph`] is a countably infinite graph described by finitely much
//! data: a base shape (an infinite spine, or a single core vertex with
//! satellite emitters), a set of attached exit paths driven by sequence
//! triples, return paths scheduled sparsely enough to keep the loop series
//! at the target entropy below 1, and a greedy completion stream that pushes
//! it to exactly 1. Vertices are enumerated level by level, so truncations
//! are prefix-stable: requesting a deeper cut never renumbers earlier
//! vertices.
//!
//! Expansion runs in three layers. The skeleton layer enumerates exit-path
//! vertices and their entry-path counts (pure combinatorics over the
//! triples). The schedule layer derives return-path lengths from those
//! counts. The id layer interleaves everything into the canonical vertex
//! order, including return chains and completion mass chains, which exist
//! only in the completed stage.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::enclosure::{exp_enc, exp_interval, sub_clamped, Enc};
use crate::error::{Error, Result};
use crate::graph::{BareStatus, EdgeBundle, ExitKind, ExitSpec, VertexId};

use super::greedy::{GreedyCompletion, Placement};
use super::intervals::{biguint_enc, interval_sequences, SequenceTriple, TripleRule};

/// Return-path schedule entries feeding the frozen enclosure of the
/// loop-series value at the target entropy; everything past the prefix is
/// covered by the geometric bound the schedule itself guarantees.
const SA_PREFIX: usize = 8;

/// How far the streamed out-bundle enumeration of an infinite emitter is
/// willing to go before giving up (the stream is reported incomplete either
/// way).
const STREAM_LEVEL_CAP: u64 = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Exit paths attached, no return paths or completion yet (the graph has
    /// no loops at all).
    Attached,
    /// Return paths and the greedy completion in place.
    Completed,
}

/// Coarse structural position of a materialized vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructuralRole {
    /// Core vertex v_n; n = 1 is the base.
    Core(u64),
    /// Infinite-emitter satellite w_i; its edges lead back toward the base.
    Satellite(u32),
    /// Tail vertex t_m of an attachment.
    Tail { attachment: usize, index: u64 },
    /// Entry-path intermediate of an attachment; ends at its tail vertex.
    EntryPath { attachment: usize, index: u64 },
    /// Return-path intermediate; the chain ends at the base vertex.
    ReturnPath,
    /// Mass-chain intermediate; the chain ends at the base vertex.
    MassChain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Infinite spine v_1 -> v_2 -> ...; attachments contact distinct spine
    /// vertices. Row-finite.
    Spine,
    /// Single core vertex plus `emitters - 1` satellites; all attachments
    /// contact the core, which becomes an infinite emitter. `None` means
    /// infinitely many satellites.
    StarCore { emitters: Option<u32> },
}

#[derive(Clone, Debug)]
pub struct AttachmentSpec {
    pub rule: TripleRule,
    /// 1-based spine index of the contact vertex (ignored for star cores).
    pub contact: u64,
}

/// One return path: w_k is the k-th exit-path vertex in creation order,
/// `a_k` counts the entry paths from the base vertex to w_k in the
/// attachment layer, `hist[p]` of them having length exactly p (so
/// `l_k = max p`), and the return path has length `n_k`.
#[derive(Clone, Debug)]
pub struct ScheduleEntry {
    pub k: u64,
    pub n_k: u64,
    pub l_k: u64,
    pub a_k: BigUint,
    pub hist: Vec<BigUint>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Role {
    /// Spine vertex v_n (n >= 1); the star core is Spine(1).
    Spine(u64),
    /// Satellite emitter w_i (star cores only).
    Star(u32),
    /// Exit-path vertex t_m of attachment j (t_1 is the contact vertex).
    Tail { j: u32, m: u64 },
    /// Intermediate of the length-2m entry path to t_m (star cores only).
    Path { j: u32, m: u64, pos: u64 },
    /// Intermediate of the return path of w_k.
    Ret { k: u64, pos: u64 },
    /// Intermediate of the completion mass path of placement m (star cores).
    Mass { m: u32, pos: u64 },
}

struct State {
    triples: Vec<SequenceTriple>,
    roles: Vec<Role>,
    ids: HashMap<Role, VertexId>,
    levels_done: u64,
    sk_levels_done: u64,
    /// w_k (1-based k): attachment index and tail index.
    w_roles: Vec<(u32, u64)>,
    w_level: Vec<u64>,
    w_index: HashMap<(u32, u64), u64>,
    schedule: Vec<ScheduleEntry>,
    /// Frozen enclosure of sum_{n >= 2} l^n(G_0) e^{-n h}.
    sa: Option<Enc>,
    greedy: Option<GreedyCompletion>,
}

pub struct BuiltGraph {
    shape: Shape,
    h: f64,
    stage: Stage,
    attachments: Vec<AttachmentSpec>,
    state: Mutex<State>,
}

fn count64(u: &BigUint) -> Result<u64> {
    u.to_u64().ok_or(Error::TruncationTooDeep)
}

fn add_coeff(poly: &mut Vec<BigUint>, len: usize, count: BigUint) {
    if poly.len() <= len {
        poly.resize(len + 1, BigUint::zero());
    }
    poly[len] += count;
}

impl BuiltGraph {
    pub fn spine(h: f64, attachments: Vec<AttachmentSpec>, stage: Stage) -> Result<BuiltGraph> {
        let mut contacts = Vec::new();
        for a in &attachments {
            if a.contact < 1 {
                return Err(Error::Precondition("contact index must be >= 1".into()));
            }
            if contacts.contains(&a.contact) {
                return Err(Error::Precondition(
                    "attachments must contact distinct spine vertices".into(),
                ));
            }
            contacts.push(a.contact);
        }
        BuiltGraph::new(Shape::Spine, h, attachments, stage)
    }

    pub fn star_core(
        h: f64,
        emitters: Option<u32>,
        attachments: Vec<AttachmentSpec>,
        stage: Stage,
    ) -> Result<BuiltGraph> {
        if let Some(n) = emitters {
            if n < 1 {
                return Err(Error::Precondition("emitter count must be >= 1".into()));
            }
        }
        if attachments.is_empty() {
            return Err(Error::Precondition(
                "star core requires at least one attachment".into(),
            ));
        }
        BuiltGraph::new(Shape::StarCore { emitters }, h, attachments, stage)
    }

    fn new(
        shape: Shape,
        h: f64,
        attachments: Vec<AttachmentSpec>,
        stage: Stage,
    ) -> Result<BuiltGraph> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Precondition("entropy h must be in ]0, inf[".into()));
        }
        let mut triples = Vec::with_capacity(attachments.len());
        for a in &attachments {
            triples.push(match a.rule {
                TripleRule::AllOnes => SequenceTriple::all_ones(),
                TripleRule::Interval(iv) => interval_sequences(iv)?,
                TripleRule::Finite => {
                    return Err(Error::Precondition(
                        "attachments need a rule-based triple".into(),
                    ))
                }
            });
        }
        Ok(BuiltGraph {
            shape,
            h,
            stage,
            attachments,
            state: Mutex::new(State {
                triples,
                roles: Vec::new(),
                ids: HashMap::new(),
                levels_done: 0,
                sk_levels_done: 0,
                w_roles: Vec::new(),
                w_level: Vec::new(),
                w_index: HashMap::new(),
                schedule: Vec::new(),
                sa: None,
                greedy: None,
            }),
        })
    }

    pub fn entropy(&self) -> f64 {
        self.h
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn attachment_count(&self) -> usize {
        self.attachments.len()
    }

    pub fn attachment_rule(&self, j: usize) -> TripleRule {
        self.attachments[j].rule
    }

    /// 1-based spine index of the contact vertex of attachment `j`.
    pub fn contact_index(&self, j: usize) -> u64 {
        match self.shape {
            Shape::Spine => self.attachments[j].contact,
            Shape::StarCore { .. } => 1,
        }
    }

    pub fn exit_specs(&self) -> Vec<ExitSpec> {
        let mut specs = Vec::new();
        if self.shape == Shape::Spine {
            specs.push(ExitSpec {
                name: "backbone".into(),
                kind: ExitKind::Backbone,
            });
        }
        for j in 0..self.attachments.len() {
            specs.push(ExitSpec {
                name: format!("exit{}", j + 1),
                kind: ExitKind::Attachment { index: j },
            });
        }
        specs
    }

    /// Runs `f` against the (lazily extended) sequence triple of attachment j.
    pub fn with_triple<R>(&self, j: usize, f: impl FnOnce(&mut SequenceTriple) -> R) -> R {
        let mut st = self.state.lock().unwrap();
        f(&mut st.triples[j])
    }

    // ----- skeleton layer -----

    /// Tail index of attachment j at level `l` (if the attachment has reached
    /// that level).
    fn tail_m_at(&self, j: usize, l: u64) -> Option<u64> {
        let c = self.contact_index(j);
        if c <= l.saturating_sub(1) {
            Some(l - c + 1)
        } else {
            None
        }
    }

    fn sk_gen(&self, st: &mut State, upto: u64) {
        while st.sk_levels_done < upto {
            let l = st.sk_levels_done + 1;
            for j in 0..self.attachments.len() {
                if let Some(m) = self.tail_m_at(j, l) {
                    let k = st.w_roles.len() as u64 + 1;
                    st.w_roles.push((j as u32, m));
                    st.w_level.push(l);
                    st.w_index.insert((j as u32, m), k);
                }
            }
            st.sk_levels_done = l;
        }
    }

    /// Entry-path counts from the base vertex to t_m of attachment j, within
    /// the attachment layer (no return paths, no completion), indexed by path
    /// length.
    fn entry_poly(&self, st: &mut State, j: usize, m: u64) -> Vec<BigUint> {
        let c = self.contact_index(j);
        let star = matches!(self.shape, Shape::StarCore { .. });
        let mut prev: Vec<BigUint> = Vec::new();
        for mm in 2..=m {
            let mut cur: Vec<BigUint> = Vec::new();
            if mm == 2 {
                let a1 = st.triples[j].a(1);
                // Entry edge from the contact vertex, reached along the spine.
                add_coeff(&mut cur, c as usize, a1);
            } else {
                let am = st.triples[j].a(mm as usize - 1);
                for (p, cnt) in prev.iter().enumerate() {
                    if !cnt.is_zero() {
                        add_coeff(&mut cur, p + 1, cnt * &am);
                    }
                }
            }
            if star {
                let cm = st.triples[j].c(mm as usize - 1);
                add_coeff(&mut cur, 1, cm);
                let bm = st.triples[j].b(mm as usize - 1);
                add_coeff(&mut cur, 2 * mm as usize, bm);
            } else {
                if mm >= 3 && mm % 2 == 1 {
                    let i = (mm as usize - 1) / 2;
                    let di = st.triples[j].d(i);
                    add_coeff(&mut cur, c as usize + i - 1, di);
                }
                let bm = st.triples[j].b(mm as usize - 1);
                add_coeff(&mut cur, (c + 2 * mm - 3) as usize, bm);
            }
            prev = cur;
        }
        prev
    }

    // ----- schedule layer -----

    fn ensure_schedule(&self, st: &mut State, k: usize) -> Result<()> {
        if self.attachments.is_empty() {
            return Err(Error::Precondition("graph has no attachments".into()));
        }
        while st.schedule.len() < k {
            let kk = st.schedule.len() + 1;
            while st.w_roles.len() < kk {
                let next = st.sk_levels_done + 1;
                assert!(next < 1_000_000, "skeleton level runaway");
                self.sk_gen(st, next);
            }
            let (j, m) = st.w_roles[kk - 1];
            let hist = self.entry_poly(st, j as usize, m);
            let a_k: BigUint = hist.iter().sum();
            let l_k = hist
                .iter()
                .rposition(|c| !c.is_zero())
                .expect("entry paths exist") as u64;
            let a_hi = biguint_enc(&a_k).hi;
            let half = self.h / 2.0;
            let small_enough = |n: u64| exp_enc(n as f64 * half).lo >= a_hi;
            let n_k = if kk == 1 {
                // Also pin the whole schedule's geometric mass under the
                // loop-series slack at h: sum_{i >= n} e^{-i h / 2} < 1 - e^{-h}.
                let ratio = exp_enc(-half);
                let total = ratio
                    .geometric_total()
                    .ok_or_else(|| Error::Precondition("entropy too small".into()))?;
                let slack = sub_clamped(&Enc::ONE, &exp_enc(-self.h));
                let mut n = 2u64;
                loop {
                    let mass = exp_enc(-(n as f64) * half).mul(&total);
                    if small_enough(n) && mass.hi < slack.lo {
                        break n;
                    }
                    n += 1;
                    assert!(n < 100_000, "return schedule runaway");
                }
            } else {
                let prev = &st.schedule[kk - 2];
                let mut n = prev.n_k + prev.l_k + 1;
                while !small_enough(n) {
                    n += 1;
                    assert!(n < 100_000, "return schedule runaway");
                }
                n
            };
            st.schedule.push(ScheduleEntry {
                k: kk as u64,
                n_k,
                l_k,
                a_k,
                hist,
            });
        }
        Ok(())
    }

    /// Schedule entries for the first `count` exit-path vertices.
    pub fn schedule_prefix(&self, count: usize) -> Result<Vec<ScheduleEntry>> {
        let mut st = self.state.lock().unwrap();
        self.ensure_schedule(&mut st, count)?;
        Ok(st.schedule[..count].to_vec())
    }

    fn ensure_sa(&self, st: &mut State) -> Result<Enc> {
        if let Some(sa) = st.sa {
            return Ok(sa);
        }
        let sa = if self.attachments.is_empty() {
            Enc::ZERO
        } else {
            self.ensure_schedule(st, SA_PREFIX)?;
            let mut sum = Enc::ZERO;
            for e in &st.schedule[..SA_PREFIX] {
                for (p, cnt) in e.hist.iter().enumerate() {
                    if !cnt.is_zero() {
                        let w = exp_enc(-((p as u64 + e.n_k) as f64) * self.h);
                        sum = sum.add(&biguint_enc(cnt).mul(&w));
                    }
                }
            }
            // Entries past the prefix: a_k e^{-n_k h} <= e^{-n_k h/2} with the
            // n_k strictly increasing, hence below the geometric mass from
            // n_{prefix} + 1 on.
            let n_last = st.schedule[SA_PREFIX - 1].n_k;
            let ratio = exp_enc(-self.h / 2.0);
            let total = ratio.geometric_total().expect("h > 0");
            let tail = exp_enc(-((n_last + 1) as f64) * self.h / 2.0).mul(&total);
            sum.add(&Enc::new(0.0, tail.hi))
        };
        st.sa = Some(sa);
        Ok(sa)
    }

    fn ensure_greedy<'a>(&self, st: &'a mut State) -> Result<&'a mut GreedyCompletion> {
        if st.greedy.is_none() {
            let sa = self.ensure_sa(st)?;
            let d = exp_enc(-self.h);
            st.greedy = Some(GreedyCompletion::start(d, sa)?);
        }
        Ok(st.greedy.as_mut().unwrap())
    }

    /// Simple-loop count at the base vertex before completion: entry paths
    /// continued by their return path.
    fn loop_count_attached(&self, st: &mut State, n: u64) -> Result<BigUint> {
        if self.attachments.is_empty() || n < 2 {
            return Ok(BigUint::zero());
        }
        loop {
            let last = st.schedule.last().map(|e| e.n_k).unwrap_or(0);
            if last >= n {
                break;
            }
            let next = st.schedule.len() + 1;
            self.ensure_schedule(st, next)?;
        }
        let mut total = BigUint::zero();
        for e in &st.schedule {
            if e.n_k >= n {
                break;
            }
            let p = (n - e.n_k) as usize;
            if let Some(c) = e.hist.get(p) {
                total += c;
            }
        }
        Ok(total)
    }

    /// Simple-loop count l^n at the base vertex. In the completed stage this
    /// equals the completed series coefficient b_n exactly; `include_base_loop`
    /// false drops the single length-1 loop.
    pub fn loop_count(&self, n: u64, include_base_loop: bool) -> Result<BigUint> {
        let mut st = self.state.lock().unwrap();
        if self.stage == Stage::Attached || n == 0 {
            return Ok(BigUint::zero());
        }
        if n == 1 {
            return Ok(if include_base_loop {
                BigUint::one()
            } else {
                BigUint::zero()
            });
        }
        let mut total = self.loop_count_attached(&mut st, n)?;
        let g = self.ensure_greedy(&mut st)?;
        total += g.correction(n)?;
        Ok(total)
    }

    /// Term enclosures l^n e^{-n beta} for n = 1..=n_terms, plus a tail
    /// enclosure of the remainder. The tail is certified only for
    /// beta >= h, where the completed series sums to exactly 1 at beta = h.
    pub fn loop_series(
        &self,
        beta: f64,
        n_terms: usize,
        include_base_loop: bool,
    ) -> Result<(Vec<Enc>, Enc)> {
        if self.stage == Stage::Attached {
            return Ok((vec![Enc::ZERO; n_terms], Enc::ZERO));
        }
        let mut terms = Vec::with_capacity(n_terms);
        let mut at_h = Enc::ZERO;
        for n in 1..=n_terms as u64 {
            let b_n = self.loop_count(n, true)?;
            let b_enc = biguint_enc(&b_n);
            let t = -(n as f64) * beta;
            let w = exp_interval(t.next_down(), t.next_up());
            let term = b_enc.mul(&w);
            terms.push(if n == 1 && !include_base_loop {
                Enc::ZERO
            } else {
                term
            });
            at_h = at_h.add(&b_enc.mul(&exp_enc(-(n as f64) * self.h)));
        }
        // The completed coefficients satisfy sum_n b_n e^{-n h} = 1, so the
        // remainder past n_terms is exactly 1 - partial at beta = h, and decays
        // by at least e^{-(n_terms+1)(beta-h)} relative to that for beta > h.
        let rem = sub_clamped(&Enc::ONE, &at_h);
        let tail = if beta == self.h {
            rem
        } else if beta > self.h {
            let d = -((n_terms as f64 + 1.0) * (beta - self.h));
            let shrink = exp_interval(d.next_down(), d.next_up());
            Enc::new(0.0, rem.mul(&shrink).hi)
        } else {
            Enc::UNKNOWN
        };
        Ok((terms, tail))
    }

    /// Enclosure of the full loop series sum_n l^n e^{-n beta}.
    pub fn loop_sum(&self, beta: f64, n_terms: usize, include_base_loop: bool) -> Result<Enc> {
        let (terms, tail) = self.loop_series(beta, n_terms, include_base_loop)?;
        let mut acc = Enc::ZERO;
        for t in &terms {
            acc = acc.add(t);
        }
        Ok(acc.add(&tail))
    }

    /// Completion placements with index <= n.
    pub fn placements_through(&self, n: u64) -> Result<Vec<Placement>> {
        let mut st = self.state.lock().unwrap();
        let g = self.ensure_greedy(&mut st)?;
        g.place_through(n)?;
        Ok(g.placements()
            .iter()
            .filter(|p| p.n_m <= n)
            .cloned()
            .collect())
    }

    // ----- id layer -----

    fn star_emitters(&self) -> Option<u32> {
        match self.shape {
            Shape::StarCore { emitters } => emitters,
            Shape::Spine => None,
        }
    }

    fn mass_chain_len(&self, n_m: u64) -> u64 {
        // Satellite class paths have length n_m - 1 from the satellite (one
        // spent on the core -> satellite edge); with a single emitter the mass
        // is a loop at the core of length n_m.
        if self.star_emitters() == Some(1) {
            n_m - 1
        } else {
            n_m - 2
        }
    }

    fn class_of(&self, m: u32) -> u32 {
        match self.star_emitters() {
            Some(n) if n >= 2 => ((m - 1) % (n - 1)) + 1,
            Some(_) => 0,
            // With infinitely many satellites, class i takes the placements
            // of 2-adic valuation i - 1, so every class stays infinite.
            None => m.trailing_zeros() + 1,
        }
    }

    fn push_role(&self, st: &mut State, role: Role) {
        let id = st.roles.len() as VertexId;
        st.roles.push(role);
        st.ids.insert(role, id);
    }

    fn gen_level(&self, st: &mut State, l: u64) -> Result<()> {
        self.sk_gen(st, l);
        match self.shape {
            Shape::Spine => {
                self.push_role(st, Role::Spine(l));
            }
            Shape::StarCore { emitters } => {
                if l == 1 {
                    self.push_role(st, Role::Spine(1));
                    if let Some(n) = emitters {
                        for i in 1..n {
                            self.push_role(st, Role::Star(i));
                        }
                    }
                } else if emitters.is_none() {
                    self.push_role(st, Role::Star((l - 1) as u32));
                }
            }
        }
        // Exit-path vertices of this level, plus their entry-path
        // intermediates for star cores.
        let ws: Vec<(u64, u32, u64)> = st
            .w_level
            .iter()
            .enumerate()
            .filter(|(_, &lv)| lv == l)
            .map(|(i, _)| (i as u64 + 1, st.w_roles[i].0, st.w_roles[i].1))
            .collect();
        for &(_, j, m) in &ws {
            self.push_role(st, Role::Tail { j, m });
            if matches!(self.shape, Shape::StarCore { .. }) {
                for pos in 1..=(2 * m - 1) {
                    self.push_role(st, Role::Path { j, m, pos });
                }
            }
        }
        if self.stage == Stage::Completed {
            let prev_ws: Vec<u64> = st
                .w_level
                .iter()
                .enumerate()
                .filter(|(_, &lv)| lv == l - 1)
                .map(|(i, _)| i as u64 + 1)
                .collect();
            for k in prev_ws {
                self.ensure_schedule(st, k as usize)?;
                let n_k = st.schedule[k as usize - 1].n_k;
                for pos in 1..n_k {
                    self.push_role(st, Role::Ret { k, pos });
                }
            }
            if matches!(self.shape, Shape::StarCore { .. }) {
                let g = self.ensure_greedy(st)?;
                // Past the f64 depth of the gap recurrence no further
                // placements can be certified; deeper levels simply carry no
                // mass vertices in the materialized view.
                let _ = g.place_through(l);
                let here: Vec<(u32, u64)> = g
                    .placements()
                    .iter()
                    .filter(|p| p.n_m == l)
                    .map(|p| (p.m, p.n_m))
                    .collect();
                for (m, n_m) in here {
                    for pos in 1..=self.mass_chain_len(n_m) {
                        self.push_role(st, Role::Mass { m, pos });
                    }
                }
            }
        }
        st.levels_done = l;
        Ok(())
    }

    fn ensure_level(&self, st: &mut State, l: u64) -> Result<()> {
        while st.levels_done < l {
            let next = st.levels_done + 1;
            self.gen_level(st, next)?;
        }
        Ok(())
    }

    fn ensure_vertex(&self, st: &mut State, v: VertexId) -> Result<()> {
        while st.roles.len() <= v as usize {
            let next = st.levels_done + 1;
            assert!(next < 1_000_000, "level runaway while seeking vertex {v}");
            self.gen_level(st, next)?;
        }
        Ok(())
    }

    fn role_level(&self, st: &mut State, role: Role) -> Result<u64> {
        Ok(match role {
            Role::Spine(n) => n,
            Role::Star(i) => match self.star_emitters() {
                Some(_) => 1,
                None => i as u64 + 1,
            },
            Role::Tail { j, m } | Role::Path { j, m, .. } => self.contact_index(j as usize) + m - 1,
            Role::Ret { k, .. } => {
                self.ensure_schedule(st, k as usize)?;
                st.w_level[k as usize - 1] + 1
            }
            Role::Mass { m, .. } => {
                let g = self.ensure_greedy(st)?;
                while g.placements().len() < m as usize {
                    g.place_next()?;
                }
                g.placements()[m as usize - 1].n_m
            }
        })
    }

    fn id_of(&self, st: &mut State, role: Role) -> Result<VertexId> {
        if let Some(&id) = st.ids.get(&role) {
            return Ok(id);
        }
        let l = self.role_level(st, role)?;
        self.ensure_level(st, l)?;
        st.ids
            .get(&role)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("role {role:?} missing at level {l}")))
    }

    // ----- public graph interface -----

    pub fn label(&self, v: VertexId) -> Option<String> {
        let mut st = self.state.lock().unwrap();
        self.ensure_vertex(&mut st, v).ok()?;
        Some(match st.roles[v as usize] {
            Role::Spine(n) => {
                if matches!(self.shape, Shape::StarCore { .. }) {
                    "v".into()
                } else {
                    format!("v{n}")
                }
            }
            Role::Star(i) => format!("w{i}"),
            Role::Tail { j, m } => format!("t{}_{m}", j + 1),
            Role::Path { j, m, pos } => format!("g{}_{m}_{pos}", j + 1),
            Role::Ret { k, pos } => format!("r{k}_{pos}"),
            Role::Mass { m, pos } => format!("p{m}_{pos}"),
        })
    }

    pub fn is_declared_emitter(&self, v: VertexId) -> bool {
        if !matches!(self.shape, Shape::StarCore { .. }) {
            return false;
        }
        let mut st = self.state.lock().unwrap();
        if self.ensure_vertex(&mut st, v).is_err() {
            return false;
        }
        match st.roles[v as usize] {
            Role::Spine(1) => true,
            Role::Star(_) => self.stage == Stage::Completed,
            _ => false,
        }
    }

    /// The infinite emitters of a completed star core: the core itself plus
    /// every satellite. `cap` bounds the enumeration when the satellite count
    /// is infinite. Spine graphs have none.
    pub fn emitter_vertices(&self, cap: usize) -> Result<Vec<VertexId>> {
        let Shape::StarCore { emitters } = self.shape else {
            return Ok(Vec::new());
        };
        let mut st = self.state.lock().unwrap();
        let mut out = vec![self.id_of(&mut st, Role::Spine(1))?];
        if self.stage == Stage::Completed {
            let n = match emitters {
                Some(n) => (n as usize).saturating_sub(1),
                None => cap.saturating_sub(1),
            };
            for i in 1..=n {
                out.push(self.id_of(&mut st, Role::Star(i as u32))?);
            }
        }
        Ok(out)
    }

    pub fn backbone_vertex(&self, index: usize) -> Result<VertexId> {
        if self.shape != Shape::Spine {
            return Err(Error::Precondition("graph has no spine".into()));
        }
        let mut st = self.state.lock().unwrap();
        self.id_of(&mut st, Role::Spine(index as u64 + 1))
    }

    pub fn attachment_vertex(&self, a: usize, index: usize) -> Result<VertexId> {
        if a >= self.attachments.len() {
            return Err(Error::Precondition(format!("no attachment {a}")));
        }
        let mut st = self.state.lock().unwrap();
        if index == 0 {
            let c = self.contact_index(a);
            self.id_of(&mut st, Role::Spine(c))
        } else {
            self.id_of(
                &mut st,
                Role::Tail {
                    j: a as u32,
                    m: index as u64 + 1,
                },
            )
        }
    }

    pub fn bare_status(&self, kind: &ExitKind, horizon: usize) -> Result<BareStatus> {
        match (kind, self.shape) {
            (ExitKind::Backbone, Shape::Spine) => Ok(match self.stage {
                // Return paths and completion arrows land on v_1.
                Stage::Completed => BareStatus::EventuallyBare { from: 2 },
                Stage::Attached => BareStatus::Bare,
            }),
            (ExitKind::Attachment { index }, _) if *index < self.attachments.len() => {
                // Every t_m receives edges besides the exit path itself.
                Ok(BareStatus::NotBareWithin { horizon })
            }
            _ => Err(Error::Precondition(
                "exit kind does not match graph kind".into(),
            )),
        }
    }

    /// All bundles from `v` to `w`, with exact multiplicities. Unlike
    /// [`out_bundles`](Self::out_bundles) this never enumerates an infinite
    /// out-stream and never overflows: multiplicities come back as big
    /// integers. Returns `(multiplicity, F)` pairs.
    /// Coarse structural position of a materialized vertex, for traversals
    /// that prune regions which cannot reach a given tail vertex.
    pub fn structural_role(&self, v: VertexId) -> Result<StructuralRole> {
        let mut st = self.state.lock().unwrap();
        self.ensure_vertex(&mut st, v)?;
        Ok(match st.roles[v as usize] {
            Role::Spine(n) => StructuralRole::Core(n),
            Role::Star(i) => StructuralRole::Satellite(i),
            Role::Tail { j, m } => StructuralRole::Tail {
                attachment: j as usize,
                index: m,
            },
            Role::Path { j, m, .. } => StructuralRole::EntryPath {
                attachment: j as usize,
                index: m,
            },
            Role::Ret { .. } => StructuralRole::ReturnPath,
            Role::Mass { .. } => StructuralRole::MassChain,
        })
    }

    pub fn bundles_between(
        &self,
        v: VertexId,
        w: VertexId,
        base_loop_removed: bool,
    ) -> Result<Vec<(BigUint, f64)>> {
        let mut st = self.state.lock().unwrap();
        self.ensure_vertex(&mut st, v)?;
        self.ensure_vertex(&mut st, w)?;
        let rv = st.roles[v as usize];
        let rw = st.roles[w as usize];
        let star = matches!(self.shape, Shape::StarCore { .. });
        let one = BigUint::one();
        let mut out: Vec<(BigUint, f64)> = Vec::new();
        match rv {
            Role::Spine(n) if !star => {
                match rw {
                    Role::Spine(t) if t == n + 1 => out.push((one.clone(), 1.0)),
                    Role::Spine(1) if self.stage == Stage::Completed => {
                        if n >= 2 {
                            let g = self.ensure_greedy(&mut st)?;
                            let corr = g.correction(n)?;
                            if !corr.is_zero() {
                                out.push((corr, 1.0));
                            }
                        }
                        if n == 1 && !base_loop_removed {
                            out.push((one.clone(), 1.0));
                        }
                    }
                    Role::Tail { j, m } => {
                        let c = self.contact_index(j as usize);
                        if n == c && m == 2 {
                            out.push((st.triples[j as usize].a(1), 1.0));
                        }
                        if n >= c {
                            let i = n - c + 1;
                            if m == 2 * i + 1 {
                                out.push((st.triples[j as usize].d(i as usize), 1.0));
                            }
                            if i % 2 == 0 && m == i / 2 + 1 {
                                out.push((st.triples[j as usize].b((i / 2) as usize), 1.0));
                            }
                        }
                    }
                    _ => {}
                }
            }
            Role::Spine(_) => match rw {
                Role::Spine(1) => {
                    if self.stage == Stage::Completed && !base_loop_removed {
                        out.push((one.clone(), 1.0));
                    }
                }
                Role::Star(_) => out.push((one.clone(), 1.0)),
                Role::Tail { j, m } => {
                    if m == 2 {
                        out.push((st.triples[j as usize].a(1), 1.0));
                    }
                    out.push((st.triples[j as usize].c(m as usize - 1), 1.0));
                }
                Role::Path { j, m, pos: 1 } => {
                    out.push((st.triples[j as usize].b(m as usize - 1), 1.0));
                }
                Role::Mass { m, pos: 1 } if self.star_emitters() == Some(1) => {
                    let g = self.ensure_greedy(&mut st)?;
                    out.push((g.placements()[m as usize - 1].k_m.clone(), 1.0));
                }
                _ => {}
            },
            Role::Star(i) if self.stage == Stage::Completed => match rw {
                Role::Mass { m, pos: 1 } if self.class_of(m) == i => {
                    let g = self.ensure_greedy(&mut st)?;
                    out.push((g.placements()[m as usize - 1].k_m.clone(), 1.0));
                }
                Role::Spine(1) => {
                    let g = self.ensure_greedy(&mut st)?;
                    g.place_through(2)?;
                    let direct: Vec<BigUint> = g
                        .placements()
                        .iter()
                        .filter(|p| p.n_m == 2)
                        .map(|p| p.k_m.clone())
                        .collect();
                    for k_m in direct {
                        if self.class_of(1) == i {
                            out.push((k_m, 1.0));
                        }
                    }
                }
                _ => {}
            },
            Role::Star(_) => {}
            Role::Tail { j, m } => {
                if rw == (Role::Tail { j, m: m + 1 }) {
                    out.push((st.triples[j as usize].a(m as usize), 1.0));
                }
                if self.stage == Stage::Completed {
                    let k = st.w_index[&(j, m)];
                    self.ensure_schedule(&mut st, k as usize)?;
                    let n_k = st.schedule[k as usize - 1].n_k;
                    let ret_start = if n_k == 1 {
                        Role::Spine(1)
                    } else {
                        Role::Ret { k, pos: 1 }
                    };
                    if rw == ret_start {
                        out.push((one.clone(), 1.0));
                    }
                }
            }
            _ => {
                // Path, return and mass intermediates have a single unit-count
                // successor; reuse the stream.
                drop(st);
                let (bundles, _) = self.out_bundles(v, 16, base_loop_removed)?;
                for b in bundles {
                    if b.dst == w {
                        if let crate::graph::FamilyKind::Finite { count, f } = b.family {
                            out.push((BigUint::from(count), f));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn out_bundles(
        &self,
        v: VertexId,
        width: usize,
        base_loop_removed: bool,
    ) -> Result<(Vec<EdgeBundle>, bool)> {
        let mut st = self.state.lock().unwrap();
        self.ensure_vertex(&mut st, v)?;
        let role = st.roles[v as usize];
        let star = matches!(self.shape, Shape::StarCore { .. });
        let mut out: Vec<EdgeBundle> = Vec::new();
        let mut complete = true;
        match role {
            Role::Spine(n) if !star => {
                let next = self.id_of(&mut st, Role::Spine(n + 1))?;
                out.push(EdgeBundle::finite(v, next, 1, 1.0));
                for j in 0..self.attachments.len() {
                    let c = self.contact_index(j);
                    let jj = j as u32;
                    if n == c {
                        let a1 = count64(&st.triples[j].a(1))?;
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 })?;
                        out.push(EdgeBundle::finite(v, t, a1, 1.0));
                    }
                    if n >= c {
                        let i = n - c + 1;
                        let di = count64(&st.triples[j].d(i as usize))?;
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 * i + 1 })?;
                        out.push(EdgeBundle::finite(v, t, di, 1.0));
                        if i % 2 == 0 {
                            let ib = i / 2;
                            let bi = count64(&st.triples[j].b(ib as usize))?;
                            let t = self.id_of(&mut st, Role::Tail { j: jj, m: ib + 1 })?;
                            out.push(EdgeBundle::finite(v, t, bi, 1.0));
                        }
                    }
                }
                if self.stage == Stage::Completed {
                    if n >= 2 {
                        let g = self.ensure_greedy(&mut st)?;
                        let corr = g.correction(n)?;
                        if !corr.is_zero() {
                            let corr = count64(&corr)?;
                            let base = self.id_of(&mut st, Role::Spine(1))?;
                            out.push(EdgeBundle::finite(v, base, corr, 1.0));
                        }
                    }
                    if n == 1 && !base_loop_removed {
                        out.push(EdgeBundle::finite(v, v, 1, 1.0));
                    }
                }
            }
            Role::Spine(_) => {
                // Star core: an infinite out-stream, enumerated by level.
                complete = false;
                if self.stage == Stage::Completed && !base_loop_removed {
                    out.push(EdgeBundle::finite(v, v, 1, 1.0));
                }
                if let Some(n) = self.star_emitters() {
                    for i in 1..n {
                        let s = self.id_of(&mut st, Role::Star(i))?;
                        out.push(EdgeBundle::finite(v, s, 1, 1.0));
                    }
                }
                let mut l = 2u64;
                'levels: while out.len() < width && l < STREAM_LEVEL_CAP {
                    if self.star_emitters().is_none() {
                        let s = self.id_of(&mut st, Role::Star((l - 1) as u32))?;
                        out.push(EdgeBundle::finite(v, s, 1, 1.0));
                    }
                    for j in 0..self.attachments.len() {
                        let jj = j as u32;
                        let m = l;
                        if m == 2 {
                            let a1 = match count64(&st.triples[j].a(1)) {
                                Ok(a) => a,
                                Err(_) => break 'levels,
                            };
                            let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 })?;
                            out.push(EdgeBundle::finite(v, t, a1, 1.0));
                        }
                        let cm = match count64(&st.triples[j].c(m as usize - 1)) {
                            Ok(c) => c,
                            Err(_) => break 'levels,
                        };
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m })?;
                        out.push(EdgeBundle::finite(v, t, cm, 1.0));
                        let bm = match count64(&st.triples[j].b(m as usize - 1)) {
                            Ok(b) => b,
                            Err(_) => break 'levels,
                        };
                        let p = self.id_of(&mut st, Role::Path { j: jj, m, pos: 1 })?;
                        out.push(EdgeBundle::finite(v, p, bm, 1.0));
                    }
                    if self.stage == Stage::Completed && self.star_emitters() == Some(1) {
                        let g = self.ensure_greedy(&mut st)?;
                        g.place_through(l)?;
                        let here: Vec<(u32, BigUint, u64)> = g
                            .placements()
                            .iter()
                            .filter(|p| p.n_m == l)
                            .map(|p| (p.m, p.k_m.clone(), p.n_m))
                            .collect();
                        for (m, k_m, _) in here {
                            let k = match count64(&k_m) {
                                Ok(k) => k,
                                Err(_) => break 'levels,
                            };
                            let p = self.id_of(&mut st, Role::Mass { m, pos: 1 })?;
                            out.push(EdgeBundle::finite(v, p, k, 1.0));
                        }
                    }
                    l += 1;
                }
            }
            Role::Star(i) => {
                if self.stage == Stage::Completed {
                    complete = false;
                    let mut m = 1u32;
                    'plc: while out.len() < width && m < 10_000 {
                        {
                            let g = self.ensure_greedy(&mut st)?;
                            while g.placements().len() < m as usize {
                                // The gap recurrence bottoms out in f64 after
                                // roughly sixteen placements; past that the
                                // stream is reported truncated, not an error.
                                if g.place_next().is_err() {
                                    break 'plc;
                                }
                            }
                        }
                        if self.class_of(m) == i {
                            let (k_m, n_m) = {
                                let g = st.greedy.as_ref().unwrap();
                                let p = &g.placements()[m as usize - 1];
                                (p.k_m.clone(), p.n_m)
                            };
                            let k = match count64(&k_m) {
                                Ok(k) => k,
                                Err(_) => break 'plc,
                            };
                            let dst = if n_m == 2 {
                                self.id_of(&mut st, Role::Spine(1))?
                            } else {
                                self.id_of(&mut st, Role::Mass { m, pos: 1 })?
                            };
                            out.push(EdgeBundle::finite(v, dst, k, 1.0));
                        }
                        m += 1;
                    }
                }
            }
            Role::Tail { j, m } => {
                let am = count64(&st.triples[j as usize].a(m as usize))?;
                let t = self.id_of(&mut st, Role::Tail { j, m: m + 1 })?;
                out.push(EdgeBundle::finite(v, t, am, 1.0));
                if self.stage == Stage::Completed {
                    let k = st.w_index[&(j, m)];
                    self.ensure_schedule(&mut st, k as usize)?;
                    let n_k = st.schedule[k as usize - 1].n_k;
                    let dst = if n_k == 1 {
                        self.id_of(&mut st, Role::Spine(1))?
                    } else {
                        self.id_of(&mut st, Role::Ret { k, pos: 1 })?
                    };
                    out.push(EdgeBundle::finite(v, dst, 1, 1.0));
                }
            }
            Role::Path { j, m, pos } => {
                let dst = if pos < 2 * m - 1 {
                    self.id_of(&mut st, Role::Path { j, m, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Tail { j, m })?
                };
                out.push(EdgeBundle::finite(v, dst, 1, 1.0));
            }
            Role::Ret { k, pos } => {
                let n_k = st.schedule[k as usize - 1].n_k;
                let dst = if pos < n_k - 1 {
                    self.id_of(&mut st, Role::Ret { k, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Spine(1))?
                };
                out.push(EdgeBundle::finite(v, dst, 1, 1.0));
            }
            Role::Mass { m, pos } => {
                let n_m = {
                    let g = self.ensure_greedy(&mut st)?;
                    g.placements()[m as usize - 1].n_m
                };
                let len = self.mass_chain_len(n_m);
                let dst = if pos < len {
                    self.id_of(&mut st, Role::Mass { m, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Spine(1))?
                };
                out.push(EdgeBundle::finite(v, dst, 1, 1.0));
            }
        }
        if out.len() > width {
            out.truncate(width);
            complete = false;
        }
        Ok((out, complete))
    }

    /// Out-neighbour stream with exact multiplicities: the same edge layout
    /// as [`Self::out_bundles`], but counts come back as big integers so
    /// bundles past the u64 range do not abort the stream. Every edge has a
    /// fixed weight exponent, returned alongside the count.
    pub fn out_bundles_big(
        &self,
        v: VertexId,
        width: usize,
        base_loop_removed: bool,
    ) -> Result<(Vec<(VertexId, BigUint, f64)>, bool)> {
        let mut st = self.state.lock().unwrap();
        self.ensure_vertex(&mut st, v)?;
        let role = st.roles[v as usize];
        let star = matches!(self.shape, Shape::StarCore { .. });
        let mut out: Vec<(VertexId, BigUint, f64)> = Vec::new();
        let mut complete = true;
        match role {
            Role::Spine(n) if !star => {
                let next = self.id_of(&mut st, Role::Spine(n + 1))?;
                out.push((next, BigUint::one(), 1.0));
                for j in 0..self.attachments.len() {
                    let c = self.contact_index(j);
                    let jj = j as u32;
                    if n == c {
                        let a1 = st.triples[j].a(1);
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 })?;
                        out.push((t, a1, 1.0));
                    }
                    if n >= c {
                        let i = n - c + 1;
                        let di = st.triples[j].d(i as usize);
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 * i + 1 })?;
                        out.push((t, di, 1.0));
                        if i % 2 == 0 {
                            let ib = i / 2;
                            let bi = st.triples[j].b(ib as usize);
                            let t = self.id_of(&mut st, Role::Tail { j: jj, m: ib + 1 })?;
                            out.push((t, bi, 1.0));
                        }
                    }
                }
                if self.stage == Stage::Completed {
                    if n >= 2 {
                        let g = self.ensure_greedy(&mut st)?;
                        let corr = g.correction(n)?;
                        if !corr.is_zero() {
                            let base = self.id_of(&mut st, Role::Spine(1))?;
                            out.push((base, corr, 1.0));
                        }
                    }
                    if n == 1 && !base_loop_removed {
                        out.push((v, BigUint::one(), 1.0));
                    }
                }
            }
            Role::Spine(_) => {
                complete = false;
                if self.stage == Stage::Completed && !base_loop_removed {
                    out.push((v, BigUint::one(), 1.0));
                }
                if let Some(n) = self.star_emitters() {
                    for i in 1..n {
                        let s = self.id_of(&mut st, Role::Star(i))?;
                        out.push((s, BigUint::one(), 1.0));
                    }
                }
                let mut l = 2u64;
                'levels: while out.len() < width && l < STREAM_LEVEL_CAP {
                    if self.star_emitters().is_none() {
                        let s = self.id_of(&mut st, Role::Star((l - 1) as u32))?;
                        out.push((s, BigUint::one(), 1.0));
                    }
                    for j in 0..self.attachments.len() {
                        let jj = j as u32;
                        let m = l;
                        if m == 2 {
                            let a1 = st.triples[j].a(1);
                            let t = self.id_of(&mut st, Role::Tail { j: jj, m: 2 })?;
                            out.push((t, a1, 1.0));
                        }
                        let cm = st.triples[j].c(m as usize - 1);
                        let t = self.id_of(&mut st, Role::Tail { j: jj, m })?;
                        out.push((t, cm, 1.0));
                        let bm = st.triples[j].b(m as usize - 1);
                        let p = self.id_of(&mut st, Role::Path { j: jj, m, pos: 1 })?;
                        out.push((p, bm, 1.0));
                    }
                    if self.stage == Stage::Completed && self.star_emitters() == Some(1) {
                        let g = self.ensure_greedy(&mut st)?;
                        if g.place_through(l).is_err() {
                            break 'levels;
                        }
                        let here: Vec<(u32, BigUint)> = g
                            .placements()
                            .iter()
                            .filter(|p| p.n_m == l)
                            .map(|p| (p.m, p.k_m.clone()))
                            .collect();
                        for (m, k_m) in here {
                            let p = self.id_of(&mut st, Role::Mass { m, pos: 1 })?;
                            out.push((p, k_m, 1.0));
                        }
                    }
                    l += 1;
                }
            }
            Role::Star(i) => {
                if self.stage == Stage::Completed {
                    complete = false;
                    let mut m = 1u32;
                    'plc: while out.len() < width && m < 10_000 {
                        {
                            let g = self.ensure_greedy(&mut st)?;
                            while g.placements().len() < m as usize {
                                if g.place_next().is_err() {
                                    break 'plc;
                                }
                            }
                        }
                        if self.class_of(m) == i {
                            let (k_m, n_m) = {
                                let g = st.greedy.as_ref().unwrap();
                                let p = &g.placements()[m as usize - 1];
                                (p.k_m.clone(), p.n_m)
                            };
                            let dst = if n_m == 2 {
                                self.id_of(&mut st, Role::Spine(1))?
                            } else {
                                self.id_of(&mut st, Role::Mass { m, pos: 1 })?
                            };
                            out.push((dst, k_m, 1.0));
                        }
                        m += 1;
                    }
                }
            }
            Role::Tail { j, m } => {
                let am = st.triples[j as usize].a(m as usize);
                let t = self.id_of(&mut st, Role::Tail { j, m: m + 1 })?;
                out.push((t, am, 1.0));
                if self.stage == Stage::Completed {
                    let k = st.w_index[&(j, m)];
                    self.ensure_schedule(&mut st, k as usize)?;
                    let n_k = st.schedule[k as usize - 1].n_k;
                    let dst = if n_k == 1 {
                        self.id_of(&mut st, Role::Spine(1))?
                    } else {
                        self.id_of(&mut st, Role::Ret { k, pos: 1 })?
                    };
                    out.push((dst, BigUint::one(), 1.0));
                }
            }
            Role::Path { j, m, pos } => {
                let dst = if pos < 2 * m - 1 {
                    self.id_of(&mut st, Role::Path { j, m, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Tail { j, m })?
                };
                out.push((dst, BigUint::one(), 1.0));
            }
            Role::Ret { k, pos } => {
                let n_k = st.schedule[k as usize - 1].n_k;
                let dst = if pos < n_k - 1 {
                    self.id_of(&mut st, Role::Ret { k, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Spine(1))?
                };
                out.push((dst, BigUint::one(), 1.0));
            }
            Role::Mass { m, pos } => {
                let n_m = {
                    let g = self.ensure_greedy(&mut st)?;
                    g.placements()[m as usize - 1].n_m
                };
                let len = self.mass_chain_len(n_m);
                let dst = if pos < len {
                    self.id_of(&mut st, Role::Mass { m, pos: pos + 1 })?
                } else {
                    self.id_of(&mut st, Role::Spine(1))?
                };
                out.push((dst, BigUint::one(), 1.0));
            }
        }
        if out.len() > width {
            out.truncate(width);
            complete = false;
        }
        Ok((out, complete))
    }
}
