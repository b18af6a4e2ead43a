//! Tagged value-copy messages between workers.

use std::fmt;

use super::grid::Rank;

/// Protocol step a message belongs to. The normalization pass broadcasts
/// diagonal blocks and exchanges normalized blocks across the diagonal; the
/// inversion pass broadcasts the mirrored factors, reduces the block products
/// and the diagonal update, and mirrors the finished inverse blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    NormBcast,
    NormExchange,
    InvBcast,
    InvPartial,
    InvDiagPartial,
    InvMirror,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::NormBcast => "norm_bcast",
            Step::NormExchange => "norm_xdiag",
            Step::InvBcast => "inv_bcast",
            Step::InvPartial => "inv_partial",
            Step::InvDiagPartial => "inv_diag",
            Step::InvMirror => "inv_mirror",
        }
    }
}

/// Message address: protocol step, the supernode being processed, and up to
/// two block coordinates (`a`, `b` are supernode indices; unused slots are
/// `usize::MAX`). Unique per destination rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag {
    pub step: Step,
    pub k: usize,
    pub a: usize,
    pub b: usize,
}

const UNUSED: usize = usize::MAX;

impl Tag {
    pub fn norm_bcast(k: usize) -> Self {
        Tag {
            step: Step::NormBcast,
            k,
            a: UNUSED,
            b: UNUSED,
        }
    }
    pub fn norm_exchange(k: usize, i: usize) -> Self {
        Tag {
            step: Step::NormExchange,
            k,
            a: i,
            b: UNUSED,
        }
    }
    pub fn inv_bcast(k: usize, i: usize) -> Self {
        Tag {
            step: Step::InvBcast,
            k,
            a: i,
            b: UNUSED,
        }
    }
    pub fn inv_partial(k: usize, j: usize, i: usize) -> Self {
        Tag {
            step: Step::InvPartial,
            k,
            a: j,
            b: i,
        }
    }
    pub fn inv_diag_partial(k: usize, i: usize) -> Self {
        Tag {
            step: Step::InvDiagPartial,
            k,
            a: i,
            b: UNUSED,
        }
    }
    pub fn inv_mirror(k: usize, i: usize) -> Self {
        Tag {
            step: Step::InvMirror,
            k,
            a: i,
            b: UNUSED,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // supernodes printed 1-based to match the grid labels
        write!(f, "{}:{}", self.step.name(), self.k + 1)?;
        if self.a != UNUSED {
            write!(f, ".{}", self.a + 1)?;
        }
        if self.b != UNUSED {
            write!(f, ".{}", self.b + 1)?;
        }
        Ok(())
    }
}

/// Block payload: optional row/column index set plus dense column-major
/// values. Always a copy; sending never aliases worker-local state.
#[derive(Debug, Clone)]
pub struct Payload<T> {
    pub rows: Vec<usize>,
    pub values: Vec<T>,
}

impl<T> Payload<T> {
    pub fn bytes(&self) -> usize {
        self.rows.len() * std::mem::size_of::<usize>()
            + self.values.len() * std::mem::size_of::<T>()
    }
}

#[derive(Debug)]
pub struct Message<T> {
    pub tag: Tag,
    pub src: Rank,
    pub payload: Payload<T>,
}
