//! Priority numbers, priority lists and per-supernode participant sets.

use std::collections::BTreeSet;

use super::grid::{ProcessorGrid, Rank};
use crate::error::{Error, Result};
use crate::symbolic::{BlockPattern, EliminationTree};

/// Task schedule for the parallel passes.
///
/// `sigma[k]` is the priority of supernode `k`: every root gets 1 and each
/// child its parent's priority plus one, so priorities increase away from the
/// roots and the level count is bounded by the tree height. `levels[p-1]`
/// lists the supernodes of priority `p` in ascending index order; tasks of
/// equal priority never depend on one another.
///
/// `procmap[k]` is the set of ranks participating in the inversion of `k`:
/// the owners of every block with both coordinates in `C(k) ∪ {k}`. The
/// normalization pass touches a subset of the same ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrioritySchedule {
    pub sigma: Vec<usize>,
    pub levels: Vec<Vec<usize>>,
    pub n_levels: usize,
    pub procmap: Vec<Vec<Rank>>,
}

/// Build the distance-to-root priority assignment and the participant map.
pub fn build_schedule(
    etree: &EliminationTree,
    grid: &ProcessorGrid,
    bp: &BlockPattern,
) -> PrioritySchedule {
    let nsup = etree.len();
    let mut sigma = vec![0usize; nsup];
    // parents have larger indices, so a descending sweep sees them first
    for k in (0..nsup).rev() {
        sigma[k] = match etree.parent[k] {
            None => 1,
            Some(p) => sigma[p] + 1,
        };
    }
    PrioritySchedule::from_sigma(sigma, etree, grid, bp)
        .expect("distance-to-root priorities are valid")
}

impl PrioritySchedule {
    /// Assemble a schedule from an explicit priority assignment. This is the
    /// hook for alternative constructions that weigh in how supernodes are
    /// distributed; any `sigma` with `sigma[root] >= 1` and
    /// `sigma[parent] < sigma[k]` is accepted.
    pub fn from_sigma(
        sigma: Vec<usize>,
        etree: &EliminationTree,
        grid: &ProcessorGrid,
        bp: &BlockPattern,
    ) -> Result<Self> {
        let nsup = sigma.len();
        if nsup != etree.len() {
            return Err(Error::DimensionMismatch {
                expected: etree.len(),
                got: nsup,
            });
        }
        for k in 0..nsup {
            if sigma[k] == 0 {
                return Err(Error::Invalid(format!("sigma[{k}] must be positive")));
            }
            if let Some(p) = etree.parent[k] {
                if sigma[p] >= sigma[k] {
                    return Err(Error::Invalid(format!(
                        "priority of supernode {k} must exceed its parent's"
                    )));
                }
            }
        }
        let n_levels = sigma.iter().copied().max().unwrap_or(0);
        let mut levels = vec![Vec::new(); n_levels];
        for k in 0..nsup {
            levels[sigma[k] - 1].push(k);
        }
        // ascending within a level; order among equals is free but fixed
        for level in &mut levels {
            level.sort_unstable();
        }
        let procmap = (0..nsup).map(|k| participants(k, grid, bp)).collect();
        Ok(PrioritySchedule {
            sigma,
            levels,
            n_levels,
            procmap,
        })
    }

    pub fn participates(&self, rank: Rank, k: usize) -> bool {
        self.procmap[k].binary_search(&rank).is_ok()
    }
}

/// Owners of every block in the dense clique `(C(k) ∪ {k})²` that the
/// inversion of `k` reads or writes. The symbolic closure makes every
/// lower pair of `C(k)` an actual block, and the mirror storage adds the
/// transposed coordinates.
fn participants(k: usize, grid: &ProcessorGrid, bp: &BlockPattern) -> Vec<Rank> {
    let mut set = BTreeSet::new();
    let mut members = vec![k];
    members.extend(bp.reach(k));
    for (idx, &a) in members.iter().enumerate() {
        set.insert(grid.map_block(a, a));
        for &b in &members[idx + 1..] {
            set.insert(grid.map_block(a, b));
            set.insert(grid.map_block(b, a));
        }
    }
    set.into_iter().collect()
}
