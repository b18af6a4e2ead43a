//! Per-rank event logs, task spans and the dependency post-processor.

use std::collections::BTreeSet;

use super::grid::Rank;
use super::message::{Step, Tag};
use super::schedule::PrioritySchedule;
use crate::symbolic::Symbolic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Send,
    Recv,
    Bcast,
    Reduce,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Send => "send",
            EventKind::Recv => "recv",
            EventKind::Bcast => "bcast",
            EventKind::Reduce => "reduce",
        }
    }
}

/// One protocol event. Send-side events carry the kind of the operation
/// (`send`, `bcast`, `reduce`); consumption is logged as `recv` at the
/// destination. `seq` is a global monotone stamp for cross-rank ordering
/// heuristics; per-rank order is the log order.
#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub rank: Rank,
    pub kind: EventKind,
    pub tag: Tag,
    pub src: Rank,
    pub dst: Rank,
    pub bytes: usize,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Normalize,
    Invert,
}

/// Active interval of one task on one rank.
#[derive(Debug, Clone)]
pub struct TaskSpan {
    pub rank: Rank,
    pub pass: Pass,
    pub k: usize,
    pub start_seq: u64,
    pub end_seq: u64,
    pub start_us: u128,
    pub end_us: u128,
}

/// Full record of a parallel run: per-rank event logs and task spans.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    pub events: Vec<Vec<TraceEvent>>,
    pub spans: Vec<Vec<TaskSpan>>,
}

impl RunTrace {
    /// Stable line format: `rank step tag src dst bytes`, grouped by rank in
    /// per-rank log order. Ranks are 1-based numbers.
    pub fn format_lines(&self) -> String {
        let mut out = String::new();
        for rank_log in &self.events {
            for e in rank_log {
                out.push_str(&format!(
                    "{} {} {} {} {} {}\n",
                    e.rank.number(),
                    e.kind.name(),
                    e.tag,
                    e.src.number(),
                    e.dst.number(),
                    e.bytes
                ));
            }
        }
        out
    }

    pub fn all_events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().flatten()
    }

    /// Messages that actually crossed ranks.
    pub fn inter_rank_count(&self) -> usize {
        self.all_events()
            .filter(|e| e.kind != EventKind::Recv && e.src != e.dst)
            .count()
    }

    /// Cross-diagonal sends of the normalization pass for supernode `k`.
    pub fn normalization_exchanges(&self, k: usize) -> usize {
        self.all_events()
            .filter(|e| e.kind == EventKind::Send && e.tag.step == Step::NormExchange && e.tag.k == k)
            .count()
    }

    /// Distinct targets of the diagonal-update reduction for supernode `k`.
    pub fn diag_reduce_targets(&self, k: usize) -> BTreeSet<Rank> {
        self.all_events()
            .filter(|e| {
                e.kind == EventKind::Reduce && e.tag.step == Step::InvDiagPartial && e.tag.k == k
            })
            .map(|e| e.dst)
            .collect()
    }

    /// Number of distinct block-row reductions of the inversion pass for `k`.
    pub fn step2_reduction_rows(&self, k: usize) -> BTreeSet<usize> {
        self.all_events()
            .filter(|e| e.kind == EventKind::Reduce && e.tag.step == Step::InvPartial && e.tag.k == k)
            .map(|e| e.tag.a)
            .collect()
    }

    /// Check write-before-read along every rank's own log: a partial product
    /// for supernode `k` that reads block `(j, i)` must appear after the
    /// events that wrote that block during the inversion of its own column.
    /// Returns human-readable violations; empty means the run is safe.
    pub fn dependency_violations(&self, symbolic: &Symbolic) -> Vec<String> {
        let mut violations = Vec::new();
        for rank_log in &self.events {
            for (pos, e) in rank_log.iter().enumerate() {
                if e.kind != EventKind::Reduce || e.tag.step != Step::InvPartial {
                    continue;
                }
                let (k, j, i) = (e.tag.k, e.tag.a, e.tag.b);
                let wrote_before = |pred: &dyn Fn(&TraceEvent) -> bool| -> bool {
                    // every matching write event must be earlier in this log
                    rank_log
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| pred(w))
                        .all(|(wpos, _)| wpos < pos)
                };
                let ok = if j > i {
                    // block (j,i) was the reduce target of inversion step 2 of i
                    wrote_before(&|w| {
                        w.kind == EventKind::Recv
                            && w.tag.step == Step::InvPartial
                            && w.tag.k == i
                            && w.tag.a == j
                    })
                } else if j < i {
                    // block (j,i) is the mirror written by step 4 of j
                    wrote_before(&|w| {
                        w.kind == EventKind::Recv
                            && w.tag.step == Step::InvMirror
                            && w.tag.k == j
                            && w.tag.a == i
                    })
                } else {
                    // diagonal block of j, updated by its own reduction
                    wrote_before(&|w| {
                        w.kind == EventKind::Recv
                            && w.tag.step == Step::InvDiagPartial
                            && w.tag.k == j
                    })
                };
                if !ok {
                    violations.push(format!(
                        "rank {}: partial for supernode {} reads block ({}, {}) before its write",
                        e.rank,
                        k + 1,
                        j + 1,
                        i + 1
                    ));
                }
                let _ = symbolic;
            }
        }
        violations
    }

    /// Count pairs of same-priority supernodes whose global active intervals
    /// overlap in the inversion pass — a witness that tree-level concurrency
    /// actually happened.
    pub fn overlapping_same_level_pairs(&self, schedule: &PrioritySchedule) -> usize {
        let nsup = schedule.sigma.len();
        let mut start = vec![u64::MAX; nsup];
        let mut end = vec![0u64; nsup];
        for spans in &self.spans {
            for s in spans {
                if s.pass == Pass::Invert {
                    start[s.k] = start[s.k].min(s.start_seq);
                    end[s.k] = end[s.k].max(s.end_seq);
                }
            }
        }
        let mut pairs = 0;
        for k1 in 0..nsup {
            for k2 in k1 + 1..nsup {
                if schedule.sigma[k1] == schedule.sigma[k2]
                    && start[k1] != u64::MAX
                    && start[k2] != u64::MAX
                    && start[k1] < end[k2]
                    && start[k2] < end[k1]
                {
                    pairs += 1;
                }
            }
        }
        pairs
    }

    /// Per-rank check that task start order follows ascending priority.
    pub fn starts_respect_priority(&self, schedule: &PrioritySchedule) -> bool {
        for spans in &self.spans {
            for pass in [Pass::Normalize, Pass::Invert] {
                let mut last = 0usize;
                for s in spans.iter().filter(|s| s.pass == pass) {
                    let sig = schedule.sigma[s.k];
                    if sig < last {
                        return false;
                    }
                    last = sig;
                }
            }
        }
        true
    }

    /// Summary of concurrency per priority level: `(level, task count)`.
    pub fn level_summary(&self, schedule: &PrioritySchedule) -> Vec<(usize, usize)> {
        (1..=schedule.n_levels)
            .map(|p| (p, schedule.levels[p - 1].len()))
            .collect()
    }
}
