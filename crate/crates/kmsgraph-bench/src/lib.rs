//! Shared fixtures for the criterion benches.

use kmsgraph::graph::{EdgeBundle, ExplicitGraph, FamilyKind, GraphView};

/// Two vertices with power-law self-loop families and unit connectors.
pub fn power_law_pair() -> GraphView {
    kmsgraph::kgd::power_law_pair()
}

/// Dense-ish 6-vertex cycle with chords, F = 1 everywhere.
pub fn six_cycle_with_chords() -> GraphView {
    let mut g = ExplicitGraph::new(6);
    for v in 0..6 {
        g.add_edge(v, (v + 1) % 6, 1, 1.0);
    }
    g.add_edge(0, 3, 2, 1.0);
    g.add_edge(2, 5, 1, 1.0);
    g.add_edge(4, 1, 1, 1.0);
    GraphView::from_explicit(g)
}

/// Single geometric self-loop family: entries are closed-form geometric sums.
pub fn geometric_loop() -> GraphView {
    let mut g = ExplicitGraph::new(1);
    g.add_bundle(EdgeBundle {
        src: 0,
        dst: 0,
        family: FamilyKind::Geometric { f0: 1.0, step: 0.5 },
    });
    g.declare_emitter(0);
    GraphView::from_explicit(g)
}
