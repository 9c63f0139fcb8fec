//! Certified analysis and synthesis of weighted countable directed graphs.
//!
//! The library computes, with explicit error enclosures, the quantities that
//! control equilibrium structure over a weighted graph: weighted adjacency
//! powers and Green functions, recurrence/transience via renewal sums of
//! simple loops, Gurevich entropy and pressure, boundary and harmonic
//! vectors, and exit summability. The `construct` module synthesizes infinite
//! graphs realizing prescribed summability intervals; `verify` provides
//! independent brute-force oracles.

pub mod enclosure;
pub mod error;
pub mod graph;

pub mod construct;
pub mod harmonic;
pub mod kgd;
pub mod series;
pub mod spectrum;
pub mod verify;

pub use enclosure::{Enc, SeriesBudget, TailPolicy};
pub use error::{Error, Result};
pub use graph::{
    BareStatus, EdgeBundle, ExitKind, ExitSpec, ExplicitGraph, FamilyKind, GraphView, Truncation,
    VertexClass, VertexId,
};
