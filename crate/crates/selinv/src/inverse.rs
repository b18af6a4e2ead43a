//! Block selected inversion.
//!
//! Consumes a normalized factor and overwrites it supernode by supernode,
//! from the last down to the first, with the corresponding blocks of `A⁻¹`:
//!
//! ```text
//! A⁻¹_{C,K} = -A⁻¹_{C,C} L̂_{C,K}
//! A⁻¹_{K,K} = U_{K,K}⁻¹ L_{K,K}⁻¹ - L̂ᵀ_{C,K} A⁻¹_{C,K}
//! A⁻¹_{K,C} = (A⁻¹_{C,K})ᵀ
//! ```
//!
//! where `C` is the set of nonzero block rows below `K`. Only entries of
//! `A⁻¹` inside the block pattern of the factor are ever touched; the gather
//! of `A⁻¹` restricted to `C x C` relies on the closure the symbolic phase
//! established. Products accumulate in ascending block-row order — the same
//! order the parallel engine's deterministic reductions use.

use std::sync::Arc;

use crate::dense;
use crate::error::{Error, Result};
use crate::factor::{BlockFactor, LowerBlock, UpperBlock};
use crate::ordering::Permutation;
use crate::scalar::Scalar;
use crate::sparse::{CscMatrix, Symmetry};
use crate::symbolic::{BlockRow, Symbolic};

/// One supernode of the computed inverse: full dense diagonal block,
/// off-diagonal blocks of `A⁻¹` below the diagonal and their transposed
/// mirrors above it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupernodeInverse<T> {
    pub diag: Vec<T>,
    pub off: Vec<LowerBlock<T>>,
    pub mirror: Vec<UpperBlock<T>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InverseMeta {
    /// Maps processed (permuted) indices to original indices.
    pub permutation: Permutation,
    /// Worker grid that produced the result, if any.
    pub grid: Option<(usize, usize)>,
}

/// Selected entries of `A⁻¹` on the block skeleton of the factor.
#[derive(Debug, Clone)]
pub struct SelectedInverse<T> {
    pub symbolic: Arc<Symbolic>,
    pub supernodes: Vec<SupernodeInverse<T>>,
    pub meta: InverseMeta,
}

/// Observation hook for the inversion loop; the access-logging tests use it
/// to check that computing supernode `k` reads only blocks with both
/// coordinates in `C(k) ∪ {k}`.
pub trait InversionObserver {
    fn supernode_begin(&mut self, _k: usize) {}
    fn gather_read(&mut self, _k: usize, _row_sup: usize, _col_sup: usize) {}
}

/// No-op observer.
pub struct Unobserved;
impl InversionObserver for Unobserved {}

/// Borrowed view of a stored inverse block, for sub-extraction.
pub enum BlockView<'a, T> {
    /// Full dense diagonal block of a supernode starting at `col_start`.
    Diag {
        col_start: usize,
        width: usize,
        values: &'a [T],
    },
    /// Lower block: `|rows| x width` with explicit global row indices.
    Lower { rows: &'a [usize], values: &'a [T] },
    /// Upper mirror block: `width x |cols|` with explicit global columns.
    Upper {
        col_start: usize,
        width: usize,
        cols: &'a [usize],
        values: &'a [T],
    },
}

/// Positions of each element of `needles` inside the sorted `haystack`.
/// The symbolic closure guarantees presence; absence is a bug.
pub fn positions(needles: &[usize], haystack: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(needles.len());
    let mut h = 0;
    for &x in needles {
        while h < haystack.len() && haystack[h] < x {
            h += 1;
        }
        assert!(
            h < haystack.len() && haystack[h] == x,
            "row {x} missing from a block the closure property promises"
        );
        out.push(h);
    }
    out
}

/// Extract the dense `|target_rows| x |target_cols|` submatrix of a stored
/// block. Pure copies; both the sequential loop and the parallel workers use
/// this for the `C x C` gather.
pub fn extract_sub<T: Scalar>(
    target_rows: &[usize],
    target_cols: &[usize],
    view: BlockView<'_, T>,
) -> Vec<T> {
    let m = target_rows.len();
    let n = target_cols.len();
    let mut out = vec![T::zero(); m * n];
    match view {
        BlockView::Diag {
            col_start,
            width,
            values,
        } => {
            for (q, &c) in target_cols.iter().enumerate() {
                for (p, &r) in target_rows.iter().enumerate() {
                    out[p + q * m] = values[(r - col_start) + (c - col_start) * width];
                }
            }
        }
        BlockView::Lower { rows, values } => {
            let nr = rows.len();
            let rowpos = positions(target_rows, rows);
            for (q, &c) in target_cols.iter().enumerate() {
                for (p, &rp) in rowpos.iter().enumerate() {
                    out[p + q * m] = values[rp + c * nr];
                }
            }
        }
        BlockView::Upper {
            col_start,
            width,
            cols,
            values,
        } => {
            let colpos = positions(target_cols, cols);
            for (q, &cp) in colpos.iter().enumerate() {
                for (p, &r) in target_rows.iter().enumerate() {
                    out[p + q * m] = values[(r - col_start) + cp * width];
                }
            }
        }
    }
    out
}

/// Lower blocks of column `i_sup` live with `Lower` layout; this resolves the
/// stored location of `A⁻¹` block `(j_sup, i_sup)` among already-inverted
/// supernodes and extracts its `target_rows x target_cols` part. In `Lower`
/// and `Upper` cases the target columns are global row indices inside the
/// other supernode.
fn gather_sub<T: Scalar>(
    symbolic: &Symbolic,
    ancestors: &[crate::factor::SupernodeFactor<T>],
    base: usize,
    jb: &BlockRow,
    ib: &BlockRow,
) -> Vec<T> {
    let part = &symbolic.partition;
    let (j_sup, i_sup) = (jb.sup, ib.sup);
    if j_sup == i_sup {
        let sn = &ancestors[j_sup - base];
        extract_sub(
            &jb.rows,
            &ib.rows,
            BlockView::Diag {
                col_start: part.start(j_sup),
                width: part.width(j_sup),
                values: &sn.diag,
            },
        )
    } else if j_sup > i_sup {
        let sn = &ancestors[i_sup - base];
        let pos = sn
            .off
            .binary_search_by_key(&j_sup, |b| b.sup)
            .expect("closed pattern: lower block present");
        let stored = &sn.off[pos];
        // columns are global rows of supernode i_sup, contiguous in storage
        let c0 = part.start(i_sup);
        let local_cols: Vec<usize> = ib.rows.iter().map(|&c| c - c0).collect();
        extract_sub(
            &jb.rows,
            &local_cols,
            BlockView::Lower {
                rows: &stored.rows,
                values: &stored.values,
            },
        )
        .into_iter()
        .collect()
    } else {
        let sn = &ancestors[j_sup - base];
        let pos = sn
            .mirror
            .binary_search_by_key(&i_sup, |b| b.sup)
            .expect("closed pattern: mirror block present");
        let stored = &sn.mirror[pos];
        extract_sub(
            &jb.rows,
            &ib.rows,
            BlockView::Upper {
                col_start: part.start(j_sup),
                width: part.width(j_sup),
                cols: &stored.cols,
                values: &stored.values,
            },
        )
    }
}

/// Sequential selected inversion; consumes the normalized factor and
/// overwrites its storage with inverse blocks.
pub fn selected_inversion<T: Scalar>(factor: BlockFactor<T>) -> Result<SelectedInverse<T>> {
    selected_inversion_observed(factor, &mut Unobserved)
}

pub fn selected_inversion_observed<T: Scalar>(
    mut factor: BlockFactor<T>,
    obs: &mut dyn InversionObserver,
) -> Result<SelectedInverse<T>> {
    if !factor.normalized {
        return Err(Error::NotNormalized);
    }
    let symbolic = Arc::clone(&factor.symbolic);
    let part = &symbolic.partition;
    let bp = &symbolic.blocks;
    let nsup = part.nsup();

    for k in (0..nsup).rev() {
        obs.supernode_begin(k);
        let w = part.width(k);
        let (head, tail) = factor.supernodes.split_at_mut(k + 1);
        let me = &mut head[k];
        let blocks = bp.blocks(k);

        let mut new_off: Vec<Vec<T>> = Vec::with_capacity(blocks.len());
        for jb in blocks {
            let mj = jb.rows.len();
            let mut acc = vec![T::zero(); mj * w];
            for (ib_idx, ib) in blocks.iter().enumerate() {
                obs.gather_read(k, jb.sup, ib.sup);
                let sub = gather_sub(&symbolic, tail, k + 1, jb, ib);
                let partial = dense::gemm_neg(mj, ib.rows.len(), w, &sub, &me.off[ib_idx].values);
                dense::add_assign(&mut acc, &partial);
            }
            new_off.push(acc);
        }

        let mut d = dense::inverse_from_packed_lu(w, &me.diag);
        for (ib_idx, ib) in blocks.iter().enumerate() {
            let q = dense::gemm_neg_at(ib.rows.len(), w, w, &me.off[ib_idx].values, &new_off[ib_idx]);
            dense::add_assign(&mut d, &q);
        }
        dense::symmetrize(w, &mut d);
        me.diag = d;

        for (b, vals) in me.off.iter_mut().zip(new_off) {
            b.values = vals;
        }
        me.mirror = me
            .off
            .iter()
            .map(|b| UpperBlock {
                sup: b.sup,
                cols: b.rows.clone(),
                values: dense::transpose(b.rows.len(), w, &b.values),
            })
            .collect();
    }

    let n = symbolic.n;
    Ok(SelectedInverse {
        symbolic,
        supernodes: factor
            .supernodes
            .into_iter()
            .map(|sn| SupernodeInverse {
                diag: sn.diag,
                off: sn.off,
                mirror: sn.mirror,
            })
            .collect(),
        meta: InverseMeta {
            permutation: Permutation::identity(n),
            grid: None,
        },
    })
}

impl<T: Scalar> SelectedInverse<T> {
    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    pub fn with_permutation(mut self, p: Permutation) -> Self {
        self.meta.permutation = p;
        self
    }

    pub fn with_grid(mut self, grid: (usize, usize)) -> Self {
        self.meta.grid = Some(grid);
        self
    }

    /// Entry of `A⁻¹` at permuted (processed) coordinates, if stored.
    pub fn entry_permuted(&self, r: usize, c: usize) -> Option<T> {
        // symmetry: resolve through the lower triangle
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        let part = &self.symbolic.partition;
        let k = part.col_to_sup[c];
        let cols = part.cols(k);
        let sn = &self.supernodes[k];
        if r < cols.end {
            let w = cols.end - cols.start;
            return Some(sn.diag[(r - cols.start) + (c - cols.start) * w]);
        }
        let rsup = part.col_to_sup[r];
        let pos = sn.off.binary_search_by_key(&rsup, |b| b.sup).ok()?;
        let b = &sn.off[pos];
        let p = b.rows.binary_search(&r).ok()?;
        Some(b.values[p + (c - cols.start) * b.rows.len()])
    }

    /// Entry at original (unpermuted) coordinates, if computed.
    pub fn entry_original(&self, i: usize, j: usize) -> Option<T> {
        let p = &self.meta.permutation;
        self.entry_permuted(p.old_to_new[i], p.old_to_new[j])
    }

    /// Extract values at original-index positions. Positions outside the
    /// computed superset are an explicit error, never a silent zero.
    pub fn extract_entries(&self, entries: &[(usize, usize)]) -> Result<Vec<T>> {
        entries
            .iter()
            .map(|&(i, j)| {
                self.entry_original(i, j)
                    .ok_or(Error::NotComputed { i, j })
            })
            .collect()
    }

    /// `Tr[A⁻¹ Bᵀ] = Σ_{(i,j): B_{ij} ≠ 0} (A⁻¹)_{ij} B_{ij}` for symmetric
    /// `B` given in original indexing; every entry of `B` must lie in the
    /// computed pattern.
    pub fn trace_product(&self, b: &CscMatrix<T>) -> Result<T> {
        let mut sum = T::zero();
        let two = T::from_re(2.0);
        for (i, j, v) in b.iter() {
            let a = self
                .entry_original(i, j)
                .ok_or(Error::TracePattern { i, j })?;
            match b.symmetry {
                Symmetry::General => sum += a * v,
                Symmetry::SymmetricLower => {
                    if i == j {
                        sum += a * v;
                    } else {
                        sum += two * a * v;
                    }
                }
            }
        }
        Ok(sum)
    }

    /// Trace-based accuracy metric `E = |n - Tr[A⁻¹ A]| / n`, using only the
    /// stored entries of `A`.
    pub fn accuracy_metric(&self, a: &CscMatrix<T>) -> Result<f64> {
        let n = self.n();
        let tr = self.trace_product(a)?;
        Ok((T::from_re(n as f64) - tr).modulus() / n as f64)
    }

    /// All computed lower-triangle entries in original indexing, as a
    /// symmetric-lower CSC matrix ready for matrix market output.
    pub fn to_lower_csc(&self) -> CscMatrix<T> {
        let n = self.n();
        let part = &self.symbolic.partition;
        let perm = &self.meta.permutation;
        let mut entries = Vec::new();
        for k in 0..part.nsup() {
            let cols = part.cols(k);
            let w = cols.end - cols.start;
            let sn = &self.supernodes[k];
            for c in cols.clone() {
                for r in c..cols.end {
                    let v = sn.diag[(r - cols.start) + (c - cols.start) * w];
                    push_lower(&mut entries, perm, r, c, v);
                }
            }
            for b in &sn.off {
                let nr = b.rows.len();
                for c in cols.clone() {
                    for (p, &r) in b.rows.iter().enumerate() {
                        push_lower(&mut entries, perm, r, c, b.values[p + (c - cols.start) * nr]);
                    }
                }
            }
        }
        crate::sparse::coord_to_csc(&crate::sparse::CooMatrix {
            n,
            entries,
            symmetry: Symmetry::SymmetricLower,
        })
    }
}

fn push_lower<T: Scalar>(
    entries: &mut Vec<(usize, usize, T)>,
    perm: &Permutation,
    r: usize,
    c: usize,
    v: T,
) {
    let io = perm.new_to_old[r];
    let jo = perm.new_to_old[c];
    let (io, jo) = if io >= jo { (io, jo) } else { (jo, io) };
    entries.push((io, jo, v));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{factorize, normalize, FactorParams};
    use crate::sparse::{coord_to_csc, symmetrize_pattern, CooMatrix};
    use crate::symbolic::{analyze, AnalyzeParams};

    fn lower_csc(n: usize, entries: &[(usize, usize, f64)]) -> CscMatrix<f64> {
        coord_to_csc(&CooMatrix {
            n,
            entries: entries.to_vec(),
            symmetry: Symmetry::SymmetricLower,
        })
    }

    fn invert(a: &CscMatrix<f64>) -> SelectedInverse<f64> {
        let pattern = symmetrize_pattern(a);
        let sym = Arc::new(analyze(&pattern, AnalyzeParams::default()).unwrap());
        let mut f = factorize(a, &sym, FactorParams::default()).unwrap();
        normalize(&mut f).unwrap();
        selected_inversion(f).unwrap()
    }

    #[test]
    fn scalar_matrix() {
        let a = lower_csc(1, &[(0, 0, 4.0)]);
        let s = invert(&a);
        assert_eq!(s.entry_permuted(0, 0), Some(0.25));
    }

    #[test]
    fn two_by_two_analytic_inverse() {
        let a = lower_csc(2, &[(0, 0, 4.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let s = invert(&a);
        let want = [[3.0 / 8.0, -2.0 / 8.0], [-2.0 / 8.0, 4.0 / 8.0]];
        for i in 0..2 {
            for j in 0..2 {
                let got = s.entry_permuted(i, j).unwrap();
                assert!((got - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unnormalized_factor_is_rejected() {
        let a = lower_csc(2, &[(0, 0, 4.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let pattern = symmetrize_pattern(&a);
        let sym = Arc::new(analyze(&pattern, AnalyzeParams::default()).unwrap());
        let f = factorize(&a, &sym, FactorParams::default()).unwrap();
        assert!(matches!(
            selected_inversion(f),
            Err(Error::NotNormalized)
        ));
    }

    #[test]
    fn tridiagonal_matches_dense_inverse() {
        // deterministic SPD tridiagonal
        let n = 5;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 4.0 + (i as f64) * 0.25));
            if i + 1 < n {
                entries.push((i + 1, i, -1.0 - (i as f64) * 0.1));
            }
        }
        let a = lower_csc(n, &entries);
        let s = invert(&a);
        let dense_inv = crate::verify::dense_inverse_oracle(&a.to_dense(), n).unwrap();
        for j in 0..n {
            for i in 0..n {
                if let Some(got) = s.entry_permuted(i, j) {
                    let want = dense_inv[i + j * n];
                    assert!(
                        (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                        "({i},{j}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn diagonal_extraction() {
        let a = lower_csc(3, &[(0, 0, 2.0), (1, 1, 4.0), (2, 2, 5.0)]);
        let s = invert(&a);
        let got = s.extract_entries(&[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(got, vec![0.5, 0.25, 0.2]);
    }

    #[test]
    fn symmetric_pair_extraction_is_equal() {
        let a = lower_csc(2, &[(0, 0, 4.0), (1, 0, 2.0), (1, 1, 3.0)]);
        let s = invert(&a);
        let got = s.extract_entries(&[(0, 1), (1, 0)]).unwrap();
        assert_eq!(got[0], got[1]);
    }

    #[test]
    fn positions_not_computed_are_an_error() {
        let a = lower_csc(3, &[(0, 0, 2.0), (1, 1, 4.0), (2, 2, 5.0)]);
        let s = invert(&a);
        assert!(matches!(
            s.extract_entries(&[(2, 0)]),
            Err(Error::NotComputed { i: 2, j: 0 })
        ));
    }

    #[test]
    fn trace_against_identity() {
        let a = lower_csc(2, &[(0, 0, 2.0), (1, 1, 4.0)]);
        let s = invert(&a);
        let b = lower_csc(2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        assert!((s.trace_product(&b).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn trace_of_a_inverse_times_a_is_n() {
        let n = 8;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 6.0 + i as f64));
            if i + 1 < n {
                entries.push((i + 1, i, 1.0 + (i % 3) as f64));
            }
            if i + 3 < n {
                entries.push((i + 3, i, -0.5));
            }
        }
        let a = lower_csc(n, &entries);
        let s = invert(&a);
        let tr = s.trace_product(&a).unwrap();
        assert!((tr - n as f64).abs() < 1e-12);
        let e = s.accuracy_metric(&a).unwrap();
        assert!(e < 1e-13);
    }

    #[test]
    fn accuracy_metric_of_identity_is_zero() {
        let a = lower_csc(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let s = invert(&a);
        assert_eq!(s.accuracy_metric(&a).unwrap(), 0.0);
    }

    #[test]
    fn exact_dense_inverse_has_tiny_metric() {
        // the metric formula itself, fed with an exact dense inverse
        let n = 4;
        let a = lower_csc(
            n,
            &[
                (0, 0, 5.0),
                (1, 0, 1.0),
                (1, 1, 6.0),
                (2, 2, 4.0),
                (3, 2, 2.0),
                (3, 3, 7.0),
            ],
        );
        let ad = a.to_dense();
        let inv = crate::verify::dense_inverse_oracle(&ad, n).unwrap();
        let mut tr = 0.0;
        for (i, j, v) in a.iter() {
            tr += inv[i + j * n] * v;
            if i != j {
                tr += inv[j + i * n] * v;
            }
        }
        let e = (n as f64 - tr).abs() / n as f64;
        assert!(e <= 1e-14);
    }

    #[test]
    fn mirrors_are_exact_transposes_and_diag_bitwise_symmetric() {
        let n = 9;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 10.0 + i as f64));
            if i + 1 < n {
                entries.push((i + 1, i, -1.0));
            }
            if i + 4 < n {
                entries.push((i + 4, i, 0.5));
            }
        }
        let a = lower_csc(n, &entries);
        let s = invert(&a);
        for (k, sn) in s.supernodes.iter().enumerate() {
            let w = s.symbolic.partition.width(k);
            for j in 0..w {
                for i in 0..w {
                    assert_eq!(sn.diag[i + j * w], sn.diag[j + i * w], "bitwise symmetry");
                }
            }
            for (b, m) in sn.off.iter().zip(&sn.mirror) {
                assert_eq!(m.values, dense::transpose(b.rows.len(), w, &b.values));
            }
        }
    }

    #[test]
    fn gather_reads_stay_inside_the_reach() {
        struct Log {
            current: usize,
            violations: usize,
            reach: Vec<Vec<usize>>,
        }
        impl InversionObserver for Log {
            fn supernode_begin(&mut self, k: usize) {
                self.current = k;
            }
            fn gather_read(&mut self, k: usize, row_sup: usize, col_sup: usize) {
                let c = &self.reach[k];
                if !(c.contains(&row_sup) || row_sup == k) || !(c.contains(&col_sup) || col_sup == k)
                {
                    self.violations += 1;
                }
            }
        }
        let n = 12;
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, 8.0));
            if i + 1 < n {
                entries.push((i + 1, i, -1.0));
            }
            if i + 5 < n {
                entries.push((i + 5, i, -0.25));
            }
        }
        let a = lower_csc(n, &entries);
        let pattern = symmetrize_pattern(&a);
        let sym = Arc::new(analyze(&pattern, AnalyzeParams::default()).unwrap());
        let mut f = factorize(&a, &sym, FactorParams::default()).unwrap();
        normalize(&mut f).unwrap();
        let reach: Vec<Vec<usize>> = (0..sym.partition.nsup())
            .map(|k| sym.blocks.reach(k))
            .collect();
        let mut log = Log {
            current: 0,
            violations: 0,
            reach,
        };
        selected_inversion_observed(f, &mut log).unwrap();
        assert_eq!(log.violations, 0);
    }
}
