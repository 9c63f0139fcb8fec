//! Deterministic constructive algorithms: summability-interval sequence
//! builders, greedy series completion, exit attachments, return-path
//! scheduling, and the four synthesis pipelines.

pub mod built;
pub mod greedy;
pub mod intervals;
pub mod pipeline;

pub use built::{AttachmentSpec, BuiltGraph, ScheduleEntry, Stage, StructuralRole};
pub use greedy::{greedy_completion, GreedyCompletion, Placement};
pub use intervals::{
    clear_denominators, interval_sequences, j_membership, IntervalSpec, Membership, SequenceTriple,
    SideReport,
};
pub use pipeline::{
    attach_exit_emitter, attach_exit_rowfinite, build, schedule_return_paths, ConstructionRecipe,
    EmitterCount, Theorem,
};
