//! In-process realization of the distributed selected-inversion protocol:
//! a `Pr x Pc` worker grid with 2D block-cyclic ownership, elimination-tree
//! priority scheduling, and tag-addressed message passing over channels.
//!
//! Broadcasts and reductions inside row/column subgroups are point-to-point
//! fan-out/fan-in; every payload is a value copy, so no mutable state is
//! shared across workers. The arithmetic per block is byte-for-byte the same
//! as the sequential path; deterministic mode additionally fixes every
//! reduction order to ascending block row, which makes the parallel result
//! bitwise equal to the sequential one.

mod engine;
mod grid;
mod message;
mod schedule;
mod trace;

pub use engine::{
    distribute_factor, parallel_selected_inversion, EngineMode, EngineParams, LocalStore,
    StoredBlock,
};
pub use grid::{ProcessorGrid, Rank};
pub use message::{Payload, Step, Tag};
pub use schedule::{build_schedule, PrioritySchedule};
pub use trace::{EventKind, Pass, RunTrace, TaskSpan, TraceEvent};
