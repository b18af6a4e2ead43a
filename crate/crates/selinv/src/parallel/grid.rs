//! Processor grid and 2D block-cyclic ownership.

use std::fmt;

use crate::error::{Error, Result};

/// Worker rank, 0-based internally; displays with the conventional 1-based
/// `P` label, so rank 11 on a 4x3 grid prints as `P12`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub usize);

impl Rank {
    /// 1-based label number.
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0 + 1)
    }
}

/// A `Pr x Pc` grid of worker ranks in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessorGrid {
    pub pr: usize,
    pub pc: usize,
}

impl ProcessorGrid {
    pub fn new(pr: usize, pc: usize) -> Result<Self> {
        if pr < 1 || pc < 1 {
            return Err(Error::Invalid(format!(
                "processor grid must have positive dimensions, got {pr}x{pc}"
            )));
        }
        Ok(ProcessorGrid { pr, pc })
    }

    pub fn ranks(&self) -> usize {
        self.pr * self.pc
    }

    /// Block-cyclic owner of supernodal block `(i, j)`, 0-based supernode
    /// indices. With 1-based labels this is
    /// `mod(I-1, Pr) * Pc + mod(J-1, Pc) + 1`.
    pub fn map_block(&self, i: usize, j: usize) -> Rank {
        Rank((i % self.pr) * self.pc + (j % self.pc))
    }

    /// Grid row and column of a rank.
    pub fn coords(&self, r: Rank) -> (usize, usize) {
        (r.0 / self.pc, r.0 % self.pc)
    }
}
