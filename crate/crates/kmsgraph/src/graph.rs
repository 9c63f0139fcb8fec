//! Countable directed multigraphs with real edge weights.
//!
//! Vertices are indexed by a deterministic enumeration (`u32`). Parallel edges
//! are grouped into [`EdgeBundle`]s; infinite out-degree is always expressed
//! through an infinite [`FamilyKind`] (never an unbounded count), so every
//! series over a family has a declared tail bound.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::construct::built::BuiltGraph;
use crate::error::{Error, Result};

pub type VertexId = u32;

/// How the edges of a bundle carry their weight values F.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FamilyKind {
    /// `count` parallel edges sharing a single F-value.
    Finite {
        count: u64,
        #[serde(rename = "F")]
        f: f64,
    },
    /// Infinitely many edges, edge `i >= 0` carrying `F = ln(i + offset)`.
    /// Weighted sums become zeta tails; convergence needs `beta > 1`.
    PowerLaw { offset: u32 },
    /// Infinitely many edges, edge `i >= 0` carrying `F = f0 + i * step`.
    /// Weighted sums are geometric; convergence needs `beta * step > 0`.
    Geometric { f0: f64, step: f64 },
}

impl FamilyKind {
    pub fn is_infinite(&self) -> bool {
        !matches!(self, FamilyKind::Finite { .. })
    }

    /// F-value of member `i`, for infinite families.
    pub fn member_f(&self, i: u64) -> f64 {
        match *self {
            FamilyKind::Finite { f, .. } => f,
            FamilyKind::PowerLaw { offset } => ((i + offset as u64) as f64).ln(),
            FamilyKind::Geometric { f0, step } => f0 + i as f64 * step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeBundle {
    pub src: VertexId,
    pub dst: VertexId,
    pub family: FamilyKind,
}

impl EdgeBundle {
    pub fn finite(src: VertexId, dst: VertexId, count: u64, f: f64) -> EdgeBundle {
        EdgeBundle {
            src,
            dst,
            family: FamilyKind::Finite { count, f },
        }
    }
}

/// A finite, fully materialized graph. Also serves as the materialized prefix
/// of an infinite graph, in which case some out-streams are marked incomplete.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplicitGraph {
    labels: Vec<Option<String>>,
    out: Vec<Vec<EdgeBundle>>,
    /// Vertices whose listed out-bundles are only a prefix of the true stream.
    incomplete: BTreeSet<VertexId>,
    /// Vertices declared (by a recipe) to be infinite emitters.
    declared_emitters: BTreeSet<VertexId>,
}

impl ExplicitGraph {
    pub fn new(n: usize) -> ExplicitGraph {
        ExplicitGraph {
            labels: vec![None; n],
            out: vec![Vec::new(); n],
            incomplete: BTreeSet::new(),
            declared_emitters: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn add_vertex(&mut self) -> VertexId {
        self.labels.push(None);
        self.out.push(Vec::new());
        (self.out.len() - 1) as VertexId
    }

    pub fn set_label(&mut self, v: VertexId, label: &str) {
        self.labels[v as usize] = Some(label.to_string());
    }

    pub fn label(&self, v: VertexId) -> Option<&str> {
        self.labels.get(v as usize).and_then(|l| l.as_deref())
    }

    pub fn add_bundle(&mut self, b: EdgeBundle) {
        assert!((b.src as usize) < self.out.len() && (b.dst as usize) < self.out.len());
        self.out[b.src as usize].push(b);
    }

    pub fn add_edge(&mut self, src: VertexId, dst: VertexId, count: u64, f: f64) {
        self.add_bundle(EdgeBundle::finite(src, dst, count, f));
    }

    pub fn mark_incomplete(&mut self, v: VertexId) {
        self.incomplete.insert(v);
    }

    pub fn declare_emitter(&mut self, v: VertexId) {
        self.declared_emitters.insert(v);
    }

    pub fn is_declared_emitter(&self, v: VertexId) -> bool {
        self.declared_emitters.contains(&v)
    }

    pub fn is_complete(&self, v: VertexId) -> bool {
        !self.incomplete.contains(&v)
    }

    pub fn bundles(&self, v: VertexId) -> &[EdgeBundle] {
        &self.out[v as usize]
    }

    pub fn all_bundles(&self) -> impl Iterator<Item = &EdgeBundle> {
        self.out.iter().flatten()
    }

    /// Distinct successor vertices of `v`.
    pub fn successors(&self, v: VertexId) -> BTreeSet<VertexId> {
        self.out[v as usize].iter().map(|b| b.dst).collect()
    }

    /// Reverse index: distinct predecessor vertices per vertex.
    pub fn predecessor_index(&self) -> Vec<BTreeSet<VertexId>> {
        let mut preds = vec![BTreeSet::new(); self.len()];
        for b in self.all_bundles() {
            preds[b.dst as usize].insert(b.src);
        }
        preds
    }

    pub fn has_infinite_family(&self, v: VertexId) -> bool {
        self.out[v as usize].iter().any(|b| b.family.is_infinite())
    }

    /// Strongly connected components (Kosaraju), as component id per vertex.
    pub fn scc_ids(&self) -> Vec<usize> {
        let n = self.len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            // Iterative post-order DFS.
            let mut stack = vec![(start, 0usize)];
            seen[start] = true;
            let succs: Vec<Vec<usize>> = (0..n)
                .map(|v| {
                    self.successors(v as VertexId)
                        .into_iter()
                        .map(|w| w as usize)
                        .collect()
                })
                .collect();
            while let Some(&mut (v, ref mut i)) = stack.last_mut() {
                if *i < succs[v].len() {
                    let w = succs[v][*i];
                    *i += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let preds = self.predecessor_index();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for &v in order.iter().rev() {
            if comp[v] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([v]);
            comp[v] = next;
            while let Some(u) = queue.pop_front() {
                for &p in &preds[u] {
                    if comp[p as usize] == usize::MAX {
                        comp[p as usize] = next;
                        queue.push_back(p as usize);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_strongly_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let ids = self.scc_ids();
        ids.iter().all(|&c| c == ids[0])
    }

    /// Vertices lying on some loop.
    pub fn loop_vertices(&self) -> BTreeSet<VertexId> {
        let comp = self.scc_ids();
        let mut sizes = BTreeMap::new();
        for &c in &comp {
            *sizes.entry(c).or_insert(0usize) += 1;
        }
        let mut on_loop = BTreeSet::new();
        for v in 0..self.len() as VertexId {
            if sizes[&comp[v as usize]] >= 2 {
                // In a multi-vertex SCC every vertex lies on a loop only if the
                // component truly cycles; components here are maximal strongly
                // connected, so yes.
                on_loop.insert(v);
            } else if self.out[v as usize].iter().any(|b| b.dst == v) {
                on_loop.insert(v);
            }
        }
        on_loop
    }
}

/// Declares where an exit path lives inside a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSpec {
    pub name: String,
    pub kind: ExitKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExitKind {
    /// The spine of a chain-extension or pipeline graph.
    Backbone,
    /// The `index`-th attached tail of a pipeline graph.
    Attachment { index: usize },
    /// An explicit vertex prefix (test graphs only; no persistence claims).
    Explicit { vertices: Vec<VertexId> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VertexClass {
    Regular,
    Sink,
    InfiniteEmitter,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BareStatus {
    Bare,
    /// Unique-predecessor property holds from this 1-based path index on.
    EventuallyBare { from: usize },
    NotBareWithin { horizon: usize },
}

#[derive(Clone)]
pub(crate) enum GraphInner {
    Explicit(ExplicitGraph),
    /// Finite core continued by an infinite F = 1 chain out of `chain_from`.
    Chain {
        core: ExplicitGraph,
        chain_from: VertexId,
    },
    /// Pipeline-constructed infinite graph.
    Built {
        built: Arc<BuiltGraph>,
        base_loop_removed: bool,
    },
}

/// Immutable view of a countable weighted digraph.
#[derive(Clone)]
pub struct GraphView {
    pub(crate) inner: GraphInner,
    pub declared_exits: Vec<ExitSpec>,
    pub declared_entropy: Option<f64>,
}

impl GraphView {
    pub fn from_explicit(g: ExplicitGraph) -> GraphView {
        GraphView {
            inner: GraphInner::Explicit(g),
            declared_exits: Vec::new(),
            declared_entropy: None,
        }
    }

    /// Finite core continued by an infinite plain chain from `chain_from`.
    pub fn chain_extension(core: ExplicitGraph, chain_from: VertexId) -> GraphView {
        assert!((chain_from as usize) < core.len());
        GraphView {
            inner: GraphInner::Chain { core, chain_from },
            declared_exits: vec![ExitSpec {
                name: "backbone".into(),
                kind: ExitKind::Backbone,
            }],
            declared_entropy: None,
        }
    }

    /// The infinite chain v0 -> v1 -> v2 -> ... with F = 1.
    pub fn backbone() -> GraphView {
        GraphView::chain_extension(ExplicitGraph::new(1), 0)
    }

    pub(crate) fn from_built(built: Arc<BuiltGraph>, base_loop_removed: bool) -> GraphView {
        let declared_exits = built.exit_specs();
        let declared_entropy = Some(built.entropy());
        GraphView {
            inner: GraphInner::Built {
                built,
                base_loop_removed,
            },
            declared_exits,
            declared_entropy,
        }
    }

    pub fn vertex_count(&self) -> Option<u64> {
        match &self.inner {
            GraphInner::Explicit(g) => Some(g.len() as u64),
            GraphInner::Chain { .. } | GraphInner::Built { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vertex_count().is_some()
    }

    pub fn as_finite(&self) -> Result<&ExplicitGraph> {
        match &self.inner {
            GraphInner::Explicit(g) => Ok(g),
            _ => Err(Error::Precondition(
                "operation requires a finite explicit graph".into(),
            )),
        }
    }

    pub fn has_vertex(&self, v: VertexId) -> bool {
        match &self.inner {
            GraphInner::Explicit(g) => (v as usize) < g.len(),
            GraphInner::Chain { .. } | GraphInner::Built { .. } => true,
        }
    }

    pub fn label(&self, v: VertexId) -> Option<String> {
        match &self.inner {
            GraphInner::Explicit(g) => g.label(v).map(str::to_string),
            GraphInner::Chain { core, .. } => {
                if (v as usize) < core.len() {
                    core.label(v).map(str::to_string)
                } else {
                    Some(format!("c{}", v as usize - core.len()))
                }
            }
            GraphInner::Built { built, .. } => built.label(v),
        }
    }

    /// The out-bundle stream of `v`, up to `width` bundles.
    /// Returns the bundles and whether they are the complete stream.
    pub fn out_bundles(&self, v: VertexId, width: usize) -> Result<(Vec<EdgeBundle>, bool)> {
        if !self.has_vertex(v) {
            return Err(Error::UnknownVertex(v));
        }
        match &self.inner {
            GraphInner::Explicit(g) => {
                let all = g.bundles(v);
                let cut = all.len().min(width);
                let complete = g.is_complete(v) && cut == all.len();
                Ok((all[..cut].to_vec(), complete))
            }
            GraphInner::Chain { core, chain_from } => {
                let n = core.len() as VertexId;
                let mut bundles = if (v as usize) < core.len() {
                    core.bundles(v).to_vec()
                } else {
                    Vec::new()
                };
                if v == *chain_from {
                    bundles.push(EdgeBundle::finite(v, n, 1, 1.0));
                } else if v >= n {
                    bundles.push(EdgeBundle::finite(v, v + 1, 1, 1.0));
                }
                let cut = bundles.len().min(width);
                let complete = cut == bundles.len();
                Ok((bundles[..cut].to_vec(), complete))
            }
            GraphInner::Built {
                built,
                base_loop_removed,
            } => built.out_bundles(v, width, *base_loop_removed),
        }
    }

    /// Full out-stream when it is known finite; errors on declared emitters.
    pub fn out_bundles_complete(&self, v: VertexId) -> Result<Vec<EdgeBundle>> {
        let (bundles, complete) = self.out_bundles(v, usize::MAX)?;
        if complete {
            Ok(bundles)
        } else {
            Err(Error::UncertifiedFamily)
        }
    }

    pub fn classify_vertex(&self, v: VertexId, probe_budget: usize) -> Result<VertexClass> {
        if !self.has_vertex(v) {
            return Err(Error::UnknownVertex(v));
        }
        if let GraphInner::Built { built, .. } = &self.inner {
            if built.is_declared_emitter(v) {
                return Ok(VertexClass::InfiniteEmitter);
            }
        }
        if let GraphInner::Explicit(g) = &self.inner {
            if g.is_declared_emitter(v) {
                return Ok(VertexClass::InfiniteEmitter);
            }
        }
        let (bundles, complete) = self.out_bundles(v, probe_budget.max(1))?;
        if bundles.iter().any(|b| b.family.is_infinite()) {
            return Ok(VertexClass::InfiniteEmitter);
        }
        if complete {
            if bundles.is_empty() {
                Ok(VertexClass::Sink)
            } else {
                Ok(VertexClass::Regular)
            }
        } else {
            Ok(VertexClass::Unknown)
        }
    }

    /// Finite subgraph on the first `depth` vertices, with at most `width`
    /// bundles per vertex and `width` members per infinite family. Edges whose
    /// target lies beyond the cut are dropped and the source stream is marked
    /// incomplete.
    pub fn truncate(&self, depth: usize, width: usize) -> Result<Truncation> {
        assert!(depth >= 1 && width >= 1);
        let depth = match self.vertex_count() {
            Some(n) => depth.min(n as usize),
            None => depth,
        };
        let mut g = ExplicitGraph::new(depth);
        for v in 0..depth as VertexId {
            if let Some(l) = self.label(v) {
                g.set_label(v, &l);
            }
            let (bundles, complete) = self.out_bundles(v, width)?;
            let mut lost = !complete;
            let mut kept = 0usize;
            for b in bundles {
                if kept >= width {
                    lost = true;
                    break;
                }
                if (b.dst as usize) >= depth {
                    lost = true;
                    continue;
                }
                match b.family {
                    FamilyKind::Finite { .. } => {
                        g.add_bundle(b);
                        kept += 1;
                    }
                    fam => {
                        // Expand an infinite family into its first members.
                        for i in 0..width as u64 {
                            g.add_edge(b.src, b.dst, 1, fam.member_f(i));
                        }
                        kept += 1;
                        lost = true;
                    }
                }
            }
            if lost {
                g.mark_incomplete(v);
            }
            if self.classify_vertex(v, width.max(4))? == VertexClass::InfiniteEmitter {
                g.declare_emitter(v);
            }
        }
        Ok(Truncation {
            graph: g,
            depth,
            width,
        })
    }

    /// Pipeline-built graph behind this view, if any, with the base-loop
    /// removal flag.
    pub(crate) fn built_parts(&self) -> Option<(&Arc<BuiltGraph>, bool)> {
        match &self.inner {
            GraphInner::Built {
                built,
                base_loop_removed,
            } => Some((built, *base_loop_removed)),
            _ => None,
        }
    }

    /// Vertex ids of an exit path, 0-based (`index 0` is t_1).
    pub fn exit_vertex(&self, exit: &ExitSpec, index: usize) -> Result<VertexId> {
        match (&exit.kind, &self.inner) {
            (ExitKind::Explicit { vertices }, _) => vertices
                .get(index)
                .copied()
                .ok_or(Error::Precondition("exit prefix exhausted".into())),
            (ExitKind::Backbone, GraphInner::Chain { core, chain_from }) => {
                if index == 0 {
                    Ok(*chain_from)
                } else {
                    Ok(core.len() as VertexId + (index as VertexId - 1))
                }
            }
            (ExitKind::Backbone, GraphInner::Built { built, .. }) => built.backbone_vertex(index),
            (ExitKind::Attachment { index: a }, GraphInner::Built { built, .. }) => {
                built.attachment_vertex(*a, index)
            }
            _ => Err(Error::Precondition(
                "exit kind does not match graph kind".into(),
            )),
        }
    }
}

/// A finite cut of a graph, usable itself as a graph.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub graph: ExplicitGraph,
    pub depth: usize,
    pub width: usize,
}

impl Truncation {
    pub fn as_view(&self) -> GraphView {
        GraphView::from_explicit(self.graph.clone())
    }
}

/// Least hereditary-and-saturated superset of a hereditary set `H`,
/// by fixed-point iteration (adding regular vertices all of whose edges land
/// in the current set).
pub fn saturation_closure(g: &GraphView, h: &BTreeSet<VertexId>) -> Result<BTreeSet<VertexId>> {
    let g = g.as_finite()?;
    for &v in h {
        if (v as usize) >= g.len() {
            return Err(Error::UnknownVertex(v));
        }
        for b in g.bundles(v) {
            if !h.contains(&b.dst) {
                return Err(Error::NotHereditary(h.iter().copied().collect()));
            }
        }
    }
    let mut cur = h.clone();
    loop {
        let mut next = cur.clone();
        for v in 0..g.len() as VertexId {
            if next.contains(&v) {
                continue;
            }
            let bundles = g.bundles(v);
            let regular = g.is_complete(v)
                && !bundles.is_empty()
                && bundles.iter().all(|b| !b.family.is_infinite());
            if regular && bundles.iter().all(|b| cur.contains(&b.dst)) {
                next.insert(v);
            }
        }
        if next == cur {
            return Ok(cur);
        }
        cur = next;
    }
}

/// Forward (hereditary) closure of a single vertex.
fn hereditary_hull(g: &ExplicitGraph, v: VertexId) -> BTreeSet<VertexId> {
    let mut set = BTreeSet::from([v]);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        for b in g.bundles(u) {
            if set.insert(b.dst) {
                queue.push_back(b.dst);
            }
        }
    }
    set
}

/// A graph is cofinal when the only non-empty hereditary saturated vertex set
/// is the whole vertex set.
pub fn is_cofinal(g: &GraphView) -> Result<bool> {
    let gx = g.as_finite()?;
    let n = gx.len();
    for v in 0..n as VertexId {
        let hull = hereditary_hull(gx, v);
        let closed = saturation_closure(g, &hull)?;
        if closed.len() != n {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug)]
pub struct NonwanderingReport {
    /// Original ids of vertices lying on loops, sorted.
    pub vertices: Vec<VertexId>,
    /// Induced subgraph (vertices relabeled 0..k by sorted order).
    pub graph: ExplicitGraph,
    /// New id -> original id.
    pub vertex_map: Vec<VertexId>,
    pub strongly_connected: bool,
    /// Whether every edge emitted by a loop vertex stays among loop vertices.
    pub hereditary: bool,
}

/// Subgraph on the vertices lying on some loop.
pub fn nonwandering_subgraph(g: &GraphView) -> Result<NonwanderingReport> {
    let gx = g.as_finite()?;
    let on_loop = gx.loop_vertices();
    let vertex_map: Vec<VertexId> = on_loop.iter().copied().collect();
    let index: BTreeMap<VertexId, VertexId> = vertex_map
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i as VertexId))
        .collect();
    let mut sub = ExplicitGraph::new(vertex_map.len());
    let mut hereditary = true;
    for &v in &vertex_map {
        for b in gx.bundles(v) {
            match index.get(&b.dst) {
                Some(&d) => sub.add_bundle(EdgeBundle {
                    src: index[&v],
                    dst: d,
                    family: b.family,
                }),
                None => hereditary = false,
            }
        }
    }
    let strongly_connected = !sub.is_empty() && sub.is_strongly_connected();
    Ok(NonwanderingReport {
        vertices: vertex_map.clone(),
        graph: sub,
        vertex_map,
        strongly_connected,
        hereditary,
    })
}

/// Classifies an exit path by predecessor uniqueness along its tail.
///
/// `Bare` additionally requires the first path vertex to receive no edges at
/// all; paths whose head sits inside a recurrent core are only eventually
/// bare. The prefix up to `horizon` is checked against materialized in-edges;
/// persistence beyond the horizon comes from the graph's structure
/// (chains and pipeline recipes declare it).
pub fn is_bare_exit(g: &GraphView, exit: &ExitSpec, horizon: usize) -> Result<BareStatus> {
    assert!(horizon >= 1);
    match (&exit.kind, &g.inner) {
        (ExitKind::Backbone, GraphInner::Chain { core, chain_from }) => {
            // Chain vertices have a unique predecessor by construction.
            let preds = core.predecessor_index();
            if preds[*chain_from as usize].is_empty() && core.bundles(*chain_from).is_empty() {
                Ok(BareStatus::Bare)
            } else {
                Ok(BareStatus::EventuallyBare { from: 2 })
            }
        }
        (_, GraphInner::Built { built, .. }) => built.bare_status(&exit.kind, horizon),
        (ExitKind::Explicit { vertices }, GraphInner::Explicit(gx)) => {
            let m = vertices.len().min(horizon + 1);
            if m < 2 {
                return Err(Error::Precondition("exit prefix too short".into()));
            }
            let preds = gx.predecessor_index();
            for w in vertices.windows(2).take(m - 1) {
                if !gx
                    .bundles(w[0])
                    .iter()
                    .any(|b| b.dst == w[1])
                {
                    return Err(Error::Precondition("exit is not a path".into()));
                }
            }
            let mut first_ok = None;
            for i in (1..m).rev() {
                let p = &preds[vertices[i] as usize];
                if p.len() == 1 && p.contains(&vertices[i - 1]) {
                    first_ok = Some(i);
                } else {
                    break;
                }
            }
            match first_ok {
                Some(1) => {
                    if preds[vertices[0] as usize].is_empty() {
                        Ok(BareStatus::Bare)
                    } else {
                        Ok(BareStatus::EventuallyBare { from: 2 })
                    }
                }
                Some(i) => Ok(BareStatus::EventuallyBare { from: i + 1 }),
                None => Ok(BareStatus::NotBareWithin { horizon }),
            }
        }
        _ => Err(Error::Precondition(
            "exit kind does not match graph kind".into(),
        )),
    }
}
