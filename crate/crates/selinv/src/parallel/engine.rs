//! Worker loop of the parallel selected inversion.
//!
//! Every rank walks the same priority-ordered task list and skips supernodes
//! it does not participate in; data dependencies are enforced purely by
//! message availability, so there is no barrier between supernodes. Messages
//! are consumed by tag; out-of-order arrivals are stashed. The normalization
//! pass broadcasts diagonal blocks down their column group, normalizes in
//! place and sends each block to the owner of its cross-diagonal mirror. The
//! inversion pass broadcasts the mirrored factors, reduces the partial
//! products onto the block owners, reduces the diagonal update onto the
//! diagonal owner, and mirrors the finished inverse blocks.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::grid::{ProcessorGrid, Rank};
use super::message::{Message, Payload, Step, Tag};
use super::schedule::PrioritySchedule;
use super::trace::{EventKind, Pass, RunTrace, TaskSpan, TraceEvent};
use crate::dense;
use crate::error::{Error, Result};
use crate::factor::{BlockFactor, LowerBlock, UpperBlock};
use crate::inverse::{extract_sub, BlockView, InverseMeta, SelectedInverse, SupernodeInverse};
use crate::ordering::Permutation;
use crate::scalar::Scalar;
use crate::symbolic::Symbolic;

/// One rank's blocks, keyed by supernodal coordinates.
#[derive(Debug, Clone)]
pub struct LocalStore<T> {
    pub blocks: HashMap<(usize, usize), StoredBlock<T>>,
}

#[derive(Debug, Clone)]
pub enum StoredBlock<T> {
    /// Diagonal block: packed LU until the inversion pass replaces it with
    /// the full dense inverse block.
    Diag { values: Vec<T> },
    /// Lower block `|rows| x width`.
    Lower { rows: Vec<usize>, values: Vec<T> },
    /// Upper mirror block `width x |cols|`; values are empty until the
    /// cross-diagonal exchange fills them.
    Upper { cols: Vec<usize>, values: Vec<T> },
}

/// Scatter an unnormalized factor into per-rank stores under block-cyclic
/// ownership. Mirror positions are created empty; the engine's normalization
/// pass fills them.
pub fn distribute_factor<T: Scalar>(
    f: &BlockFactor<T>,
    grid: &ProcessorGrid,
) -> Result<Vec<LocalStore<T>>> {
    if f.normalized {
        return Err(Error::Invalid(
            "distribute an unnormalized factor; the engine performs normalization".into(),
        ));
    }
    let mut stores: Vec<LocalStore<T>> = (0..grid.ranks())
        .map(|_| LocalStore {
            blocks: HashMap::new(),
        })
        .collect();
    for (k, sn) in f.supernodes.iter().enumerate() {
        let owner = grid.map_block(k, k);
        stores[owner.0].blocks.insert(
            (k, k),
            StoredBlock::Diag {
                values: sn.diag.clone(),
            },
        );
        for b in &sn.off {
            let owner = grid.map_block(b.sup, k);
            stores[owner.0].blocks.insert(
                (b.sup, k),
                StoredBlock::Lower {
                    rows: b.rows.clone(),
                    values: b.values.clone(),
                },
            );
            let mirror_owner = grid.map_block(k, b.sup);
            stores[mirror_owner.0].blocks.insert(
                (k, b.sup),
                StoredBlock::Upper {
                    cols: b.rows.clone(),
                    values: Vec::new(),
                },
            );
        }
    }
    Ok(stores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    /// Reductions accumulate in ascending block-row order: bitwise equal to
    /// the sequential path and reproducible across runs.
    Deterministic,
    /// Reductions accumulate in arrival order.
    Fast,
}

#[derive(Debug, Clone, Copy)]
pub struct EngineParams {
    pub mode: EngineMode,
    /// Watchdog: a rank that waits longer than this on one message aborts
    /// with a dump of its pending tags.
    pub timeout: Duration,
    /// Record one event per protocol message. Task spans are always kept;
    /// per-message events cost real memory and time on large runs.
    pub collect_events: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            mode: EngineMode::Deterministic,
            timeout: Duration::from_secs(30),
            collect_events: true,
        }
    }
}

struct Ctx {
    symbolic: Arc<Symbolic>,
    schedule: Arc<PrioritySchedule>,
    grid: ProcessorGrid,
    mode: EngineMode,
    timeout: Duration,
    collect_events: bool,
    spin_budget: u32,
    seq: AtomicU64,
    epoch: Instant,
}

struct Worker<T: Scalar> {
    rank: Rank,
    store: LocalStore<T>,
    rx: Receiver<Vec<Message<T>>>,
    txs: Vec<Sender<Vec<Message<T>>>>,
    /// outgoing messages buffered per destination; flushed before any
    /// blocking receive so no peer can wait on a buffered message
    out: Vec<Vec<Message<T>>>,
    stash: HashMap<Tag, Payload<T>>,
    events: Vec<TraceEvent>,
    spans: Vec<TaskSpan>,
    ctx: Arc<Ctx>,
}

struct WorkerOutput<T> {
    store: LocalStore<T>,
    events: Vec<TraceEvent>,
    spans: Vec<TaskSpan>,
}

impl<T: Scalar> Worker<T> {
    fn next_seq(&self) -> u64 {
        self.ctx.seq.fetch_add(1, Ordering::Relaxed)
    }

    fn send(&mut self, kind: EventKind, tag: Tag, dst: Rank, payload: Payload<T>) {
        if self.ctx.collect_events {
            let seq = self.next_seq();
            self.events.push(TraceEvent {
                rank: self.rank,
                kind,
                tag,
                src: self.rank,
                dst,
                bytes: payload.bytes(),
                seq,
            });
        }
        self.out[dst.0].push(Message {
            tag,
            src: self.rank,
            payload,
        });
    }

    /// Push every buffered message out. Unbounded channels: never blocks; a
    /// closed peer only happens after an error elsewhere, which the
    /// coordinator reports.
    fn flush(&mut self) {
        for dst in 0..self.out.len() {
            if self.out[dst].is_empty() {
                continue;
            }
            let batch = std::mem::take(&mut self.out[dst]);
            if dst == self.rank.0 {
                for msg in batch {
                    self.stash.insert(msg.tag, msg.payload);
                }
            } else {
                let _ = self.txs[dst].send(batch);
            }
        }
    }

    fn log_recv(&mut self, tag: Tag, src: Rank, bytes: usize) {
        if self.ctx.collect_events {
            let seq = self.next_seq();
            self.events.push(TraceEvent {
                rank: self.rank,
                kind: EventKind::Recv,
                tag,
                src,
                dst: self.rank,
                bytes,
                seq,
            });
        }
    }

    fn deadlock(&self, waiting: String) -> Error {
        let mut pending: Vec<String> = self.stash.keys().map(|t| t.to_string()).collect();
        pending.sort();
        Error::Deadlock {
            rank: self.rank.number(),
            timeout_ms: self.ctx.timeout.as_millis() as u64,
            waiting,
            pending: pending.join(", "),
        }
    }

    /// Pull one batch into the stash, spinning briefly before parking when
    /// the workers do not oversubscribe the host; gaps between tasks are far
    /// shorter than a park/unpark round trip.
    fn pump(&mut self, deadline: Instant, waiting: &dyn Fn() -> String) -> Result<()> {
        use std::sync::mpsc::TryRecvError;
        for _ in 0..self.ctx.spin_budget {
            match self.rx.try_recv() {
                Ok(batch) => {
                    for msg in batch {
                        self.stash.insert(msg.tag, msg.payload);
                    }
                    return Ok(());
                }
                Err(TryRecvError::Empty) => std::hint::spin_loop(),
                Err(TryRecvError::Disconnected) => return Err(self.deadlock(waiting())),
            }
        }
        let remaining = deadline.saturating_duration_since(Instant::now());
        match self.rx.recv_timeout(remaining) {
            Ok(batch) => {
                for msg in batch {
                    self.stash.insert(msg.tag, msg.payload);
                }
                Ok(())
            }
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                Err(self.deadlock(waiting()))
            }
        }
    }

    /// Blocking receive of one specific tag; other arrivals are stashed.
    /// Flushes buffered sends first so peers never wait on them.
    fn recv_tag(&mut self, tag: Tag) -> Result<Payload<T>> {
        self.flush();
        let deadline = Instant::now() + self.ctx.timeout;
        loop {
            if let Some(p) = self.stash.remove(&tag) {
                let bytes = p.bytes();
                // source rank is reconstructed from the ownership rules
                self.log_recv(tag, self.tag_source(tag), bytes);
                return Ok(p);
            }
            self.pump(deadline, &|| tag.to_string())?;
        }
    }

    /// Blocking receive of any tag from `wanted`, in arrival order.
    fn recv_any(&mut self, wanted: &BTreeSet<Tag>) -> Result<(Tag, Payload<T>)> {
        self.flush();
        let deadline = Instant::now() + self.ctx.timeout;
        loop {
            for &tag in wanted {
                if let Some(p) = self.stash.remove(&tag) {
                    let bytes = p.bytes();
                    self.log_recv(tag, self.tag_source(tag), bytes);
                    return Ok((tag, p));
                }
            }
            self.pump(deadline, &|| {
                let tags: Vec<String> = wanted.iter().map(|t| t.to_string()).collect();
                format!("any of [{}]", tags.join(", "))
            })?;
        }
    }

    /// Rank that produced a message with this tag, per the ownership rules.
    fn tag_source(&self, tag: Tag) -> Rank {
        let g = &self.ctx.grid;
        match tag.step {
            Step::NormBcast => g.map_block(tag.k, tag.k),
            Step::NormExchange => g.map_block(tag.a, tag.k),
            Step::InvBcast => g.map_block(tag.k, tag.a),
            Step::InvPartial => g.map_block(tag.a, tag.b),
            Step::InvDiagPartial => g.map_block(tag.a, tag.k),
            Step::InvMirror => g.map_block(tag.a, tag.k),
        }
    }

    fn lower(&self, key: (usize, usize)) -> (&Vec<usize>, &Vec<T>) {
        match self.store.blocks.get(&key) {
            Some(StoredBlock::Lower { rows, values }) => (rows, values),
            _ => panic!("rank {} missing lower block {:?}", self.rank, key),
        }
    }

    fn diag(&self, k: usize) -> &Vec<T> {
        match self.store.blocks.get(&(k, k)) {
            Some(StoredBlock::Diag { values }) => values,
            _ => panic!("rank {} missing diagonal block {k}", self.rank),
        }
    }

    fn run(&mut self) -> Result<()> {
        let schedule = Arc::clone(&self.ctx.schedule);
        for level in &schedule.levels {
            for &k in level {
                if schedule.participates(self.rank, k) {
                    self.task(Pass::Normalize, k)?;
                }
            }
        }
        for level in &schedule.levels {
            for &k in level {
                if schedule.participates(self.rank, k) {
                    self.task(Pass::Invert, k)?;
                }
            }
        }
        // peers may still be waiting on sends from the final tasks
        self.flush();
        Ok(())
    }

    fn task(&mut self, pass: Pass, k: usize) -> Result<()> {
        let start_seq = self.next_seq();
        let start_us = self.ctx.epoch.elapsed().as_micros();
        match pass {
            Pass::Normalize => self.normalize_task(k)?,
            Pass::Invert => self.invert_task(k)?,
        }
        let end_seq = self.next_seq();
        self.spans.push(TaskSpan {
            rank: self.rank,
            pass,
            k,
            start_seq,
            end_seq,
            start_us,
            end_us: self.ctx.epoch.elapsed().as_micros(),
        });
        Ok(())
    }

    fn normalize_task(&mut self, k: usize) -> Result<()> {
        let symbolic = Arc::clone(&self.ctx.symbolic);
        let grid = self.ctx.grid;
        let blocks = symbolic.blocks.blocks(k);
        if blocks.is_empty() {
            return Ok(());
        }
        let w = symbolic.partition.width(k);
        let diag_owner = grid.map_block(k, k);

        // owner of the diagonal block fans it out down the column group
        if self.rank == diag_owner {
            let packed = self.diag(k).clone();
            let mut sent = BTreeSet::new();
            for b in blocks {
                let dst = grid.map_block(b.sup, k);
                if sent.insert(dst) {
                    self.send(
                        EventKind::Bcast,
                        Tag::norm_bcast(k),
                        dst,
                        Payload {
                            rows: Vec::new(),
                            values: packed.clone(),
                        },
                    );
                }
            }
        }

        // lower-block owners solve against the received diagonal and send
        // the normalized block across the diagonal
        let mine: Vec<usize> = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| grid.map_block(b.sup, k) == self.rank)
            .map(|(idx, _)| idx)
            .collect();
        if !mine.is_empty() {
            let packed = self.recv_tag(Tag::norm_bcast(k))?;
            for idx in mine {
                let b = &blocks[idx];
                let nb = b.rows.len();
                let values = match self.store.blocks.get_mut(&(b.sup, k)) {
                    Some(StoredBlock::Lower { values, .. }) => values,
                    _ => unreachable!("ownership established above"),
                };
                dense::solve_unit_lower_right(nb, w, &packed.values, values);
                let normalized = values.clone();
                let dst = grid.map_block(k, b.sup);
                self.send(
                    EventKind::Send,
                    Tag::norm_exchange(k, b.sup),
                    dst,
                    Payload {
                        rows: b.rows.clone(),
                        values: normalized,
                    },
                );
            }
        }

        // mirror owners store the transposed block
        for b in blocks {
            if grid.map_block(k, b.sup) == self.rank {
                let p = self.recv_tag(Tag::norm_exchange(k, b.sup))?;
                let nb = p.rows.len();
                let transposed = dense::transpose(nb, w, &p.values);
                self.store.blocks.insert(
                    (k, b.sup),
                    StoredBlock::Upper {
                        cols: p.rows,
                        values: transposed,
                    },
                );
            }
        }
        Ok(())
    }

    fn invert_task(&mut self, k: usize) -> Result<()> {
        let symbolic = Arc::clone(&self.ctx.symbolic);
        let grid = self.ctx.grid;
        let part = &symbolic.partition;
        let blocks = symbolic.blocks.blocks(k);
        let w = part.width(k);
        let diag_owner = grid.map_block(k, k);

        if blocks.is_empty() {
            if self.rank == diag_owner {
                let packed = self.diag(k).clone();
                let mut d = dense::inverse_from_packed_lu(w, &packed);
                dense::symmetrize(w, &mut d);
                self.store
                    .blocks
                    .insert((k, k), StoredBlock::Diag { values: d });
            }
            return Ok(());
        }

        // mirrored factors travel down their column groups to everyone who
        // holds a block of that column of the inverse
        for ib in blocks {
            if grid.map_block(k, ib.sup) == self.rank {
                let (cols, values) = match self.store.blocks.get(&(k, ib.sup)) {
                    Some(StoredBlock::Upper { cols, values }) => (cols.clone(), values.clone()),
                    _ => panic!("mirror block ({k},{}) not filled", ib.sup),
                };
                // payload carries the block back in |rows| x w layout
                let lhat = dense::transpose(w, cols.len(), &values);
                let mut sent = BTreeSet::new();
                for jb in blocks {
                    let dst = grid.map_block(jb.sup, ib.sup);
                    if sent.insert(dst) {
                        self.send(
                            EventKind::Bcast,
                            Tag::inv_bcast(k, ib.sup),
                            dst,
                            Payload {
                                rows: cols.clone(),
                                values: lhat.clone(),
                            },
                        );
                    }
                }
            }
        }

        // local partial products, one per stored pair (j, i)
        let mut lhat_cache: HashMap<usize, Payload<T>> = HashMap::new();
        for jb in blocks {
            for ib in blocks {
                if grid.map_block(jb.sup, ib.sup) != self.rank {
                    continue;
                }
                if !lhat_cache.contains_key(&ib.sup) {
                    let p = self.recv_tag(Tag::inv_bcast(k, ib.sup))?;
                    lhat_cache.insert(ib.sup, p);
                }
                let lhat = &lhat_cache[&ib.sup];
                let sub = self.gather_pair(&symbolic, jb, ib);
                let partial =
                    dense::gemm_neg(jb.rows.len(), ib.rows.len(), w, &sub, &lhat.values);
                self.send(
                    EventKind::Reduce,
                    Tag::inv_partial(k, jb.sup, ib.sup),
                    grid.map_block(jb.sup, k),
                    Payload {
                        rows: Vec::new(),
                        values: partial,
                    },
                );
            }
        }

        // reduce onto the block owners; then the diagonal contribution, the
        // overwrite and the mirror send
        for jb in blocks {
            if grid.map_block(jb.sup, k) != self.rank {
                continue;
            }
            let mj = jb.rows.len();
            let mut acc = vec![T::zero(); mj * w];
            match self.ctx.mode {
                EngineMode::Deterministic => {
                    for ib in blocks {
                        let p = self.recv_tag(Tag::inv_partial(k, jb.sup, ib.sup))?;
                        dense::add_assign(&mut acc, &p.values);
                    }
                }
                EngineMode::Fast => {
                    let mut wanted: BTreeSet<Tag> = blocks
                        .iter()
                        .map(|ib| Tag::inv_partial(k, jb.sup, ib.sup))
                        .collect();
                    while !wanted.is_empty() {
                        let (tag, p) = self.recv_any(&wanted)?;
                        wanted.remove(&tag);
                        dense::add_assign(&mut acc, &p.values);
                    }
                }
            }
            let (_, lhat) = self.lower((jb.sup, k));
            let q = dense::gemm_neg_at(mj, w, w, lhat, &acc);
            self.send(
                EventKind::Reduce,
                Tag::inv_diag_partial(k, jb.sup),
                diag_owner,
                Payload {
                    rows: Vec::new(),
                    values: q,
                },
            );
            match self.store.blocks.get_mut(&(jb.sup, k)) {
                Some(StoredBlock::Lower { values, .. }) => *values = acc.clone(),
                _ => unreachable!(),
            }
            self.send(
                EventKind::Send,
                Tag::inv_mirror(k, jb.sup),
                grid.map_block(k, jb.sup),
                Payload {
                    rows: jb.rows.clone(),
                    values: acc,
                },
            );
        }

        // diagonal update and symmetrization
        if self.rank == diag_owner {
            let packed = self.diag(k).clone();
            let mut d = dense::inverse_from_packed_lu(w, &packed);
            match self.ctx.mode {
                EngineMode::Deterministic => {
                    for ib in blocks {
                        let p = self.recv_tag(Tag::inv_diag_partial(k, ib.sup))?;
                        dense::add_assign(&mut d, &p.values);
                    }
                }
                EngineMode::Fast => {
                    let mut wanted: BTreeSet<Tag> = blocks
                        .iter()
                        .map(|ib| Tag::inv_diag_partial(k, ib.sup))
                        .collect();
                    while !wanted.is_empty() {
                        let (tag, p) = self.recv_any(&wanted)?;
                        wanted.remove(&tag);
                        dense::add_assign(&mut d, &p.values);
                    }
                }
            }
            dense::symmetrize(w, &mut d);
            self.store
                .blocks
                .insert((k, k), StoredBlock::Diag { values: d });
        }

        // mirror owners store the transposed inverse blocks
        for jb in blocks {
            if grid.map_block(k, jb.sup) == self.rank {
                let p = self.recv_tag(Tag::inv_mirror(k, jb.sup))?;
                let nb = p.rows.len();
                let transposed = dense::transpose(nb, w, &p.values);
                self.store.blocks.insert(
                    (k, jb.sup),
                    StoredBlock::Upper {
                        cols: p.rows,
                        values: transposed,
                    },
                );
            }
        }
        Ok(())
    }

    /// Extract `A⁻¹[rows(J,k), rows(I,k)]` from the locally stored block
    /// `(J, I)`, already holding inverse values.
    fn gather_pair(
        &self,
        symbolic: &Symbolic,
        jb: &crate::symbolic::BlockRow,
        ib: &crate::symbolic::BlockRow,
    ) -> Vec<T> {
        let part = &symbolic.partition;
        let (j_sup, i_sup) = (jb.sup, ib.sup);
        match self.store.blocks.get(&(j_sup, i_sup)) {
            Some(StoredBlock::Diag { values }) => extract_sub(
                &jb.rows,
                &ib.rows,
                BlockView::Diag {
                    col_start: part.start(j_sup),
                    width: part.width(j_sup),
                    values,
                },
            ),
            Some(StoredBlock::Lower { rows, values }) => {
                let c0 = part.start(i_sup);
                let local_cols: Vec<usize> = ib.rows.iter().map(|&c| c - c0).collect();
                extract_sub(
                    &jb.rows,
                    &local_cols,
                    BlockView::Lower { rows, values },
                )
            }
            Some(StoredBlock::Upper { cols, values }) => extract_sub(
                &jb.rows,
                &ib.rows,
                BlockView::Upper {
                    col_start: part.start(j_sup),
                    width: part.width(j_sup),
                    cols,
                    values,
                },
            ),
            None => panic!(
                "rank {} asked for block ({}, {}) it does not own",
                self.rank, j_sup, i_sup
            ),
        }
    }
}

/// Run the message-passing selected inversion over distributed stores.
/// Returns the gathered inverse and the full event trace. With a single rank
/// the worker runs inline on the calling thread.
pub fn parallel_selected_inversion<T: Scalar>(
    stores: Vec<LocalStore<T>>,
    symbolic: &Arc<Symbolic>,
    schedule: &Arc<PrioritySchedule>,
    grid: &ProcessorGrid,
    params: EngineParams,
) -> Result<(SelectedInverse<T>, RunTrace)> {
    let p = grid.ranks();
    assert_eq!(stores.len(), p, "one store per rank");
    let ctx = Arc::new(Ctx {
        symbolic: Arc::clone(symbolic),
        schedule: Arc::clone(schedule),
        grid: *grid,
        mode: params.mode,
        timeout: params.timeout,
        collect_events: params.collect_events,
        seq: AtomicU64::new(0),
        epoch: Instant::now(),
    });

    let mut txs = Vec::with_capacity(p);
    let mut rxs = Vec::with_capacity(p);
    for _ in 0..p {
        let (tx, rx) = channel::<Vec<Message<T>>>();
        txs.push(tx);
        rxs.push(rx);
    }

    let mut workers: Vec<Worker<T>> = stores
        .into_iter()
        .zip(rxs)
        .enumerate()
        .map(|(r, (store, rx))| Worker {
            rank: Rank(r),
            store,
            rx,
            txs: txs.clone(),
            out: (0..p).map(|_| Vec::new()).collect(),
            stash: HashMap::new(),
            events: Vec::new(),
            spans: Vec::new(),
            ctx: Arc::clone(&ctx),
        })
        .collect();
    drop(txs);

    let outputs: Vec<Result<WorkerOutput<T>>> = if p == 1 {
        let mut w = workers.pop().unwrap();
        let res = w.run();
        vec![res.map(|_| WorkerOutput {
            store: w.store,
            events: w.events,
            spans: w.spans,
        })]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = workers
                .into_iter()
                .map(|mut w| {
                    scope.spawn(move || {
                        let res = w.run();
                        res.map(|_| WorkerOutput {
                            store: w.store,
                            events: w.events,
                            spans: w.spans,
                        })
                    })
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(r, h)| match h.join() {
                    Ok(res) => res,
                    Err(_) => Err(Error::WorkerPanic { rank: r + 1 }),
                })
                .collect()
        })
    };

    let mut stores = Vec::with_capacity(p);
    let mut trace = RunTrace::default();
    for out in outputs {
        let out = out?;
        stores.push(out.store);
        trace.events.push(out.events);
        trace.spans.push(out.spans);
    }

    let inverse = assemble(stores, symbolic, grid)?;
    Ok((inverse, trace))
}

/// Gather the distributed inverse blocks back into one structure.
fn assemble<T: Scalar>(
    mut stores: Vec<LocalStore<T>>,
    symbolic: &Arc<Symbolic>,
    grid: &ProcessorGrid,
) -> Result<SelectedInverse<T>> {
    let part = &symbolic.partition;
    let mut supernodes = Vec::with_capacity(part.nsup());
    for k in 0..part.nsup() {
        let diag = match stores[grid.map_block(k, k).0].blocks.remove(&(k, k)) {
            Some(StoredBlock::Diag { values }) => values,
            _ => return Err(Error::Invalid(format!("missing diagonal block {k}"))),
        };
        let mut off = Vec::new();
        let mut mirror = Vec::new();
        for b in symbolic.blocks.blocks(k) {
            match stores[grid.map_block(b.sup, k).0].blocks.remove(&(b.sup, k)) {
                Some(StoredBlock::Lower { rows, values }) => {
                    off.push(LowerBlock {
                        sup: b.sup,
                        rows,
                        values,
                    });
                }
                _ => return Err(Error::Invalid(format!("missing block ({}, {k})", b.sup))),
            }
            match stores[grid.map_block(k, b.sup).0].blocks.remove(&(k, b.sup)) {
                Some(StoredBlock::Upper { cols, values }) => {
                    mirror.push(UpperBlock {
                        sup: b.sup,
                        cols,
                        values,
                    });
                }
                _ => return Err(Error::Invalid(format!("missing mirror ({k}, {})", b.sup))),
            }
        }
        supernodes.push(SupernodeInverse { diag, off, mirror });
    }
    Ok(SelectedInverse {
        symbolic: Arc::clone(symbolic),
        supernodes,
        meta: InverseMeta {
            permutation: Permutation::identity(symbolic.n),
            grid: Some((grid.pr, grid.pc)),
        },
    })
}
