//! Sparse matrix types: coordinate and compressed-column storage, sparsity
//! patterns, matrix market I/O and shifted matrices `A(z) = H - z S`.
//!
//! Indices are 0-based everywhere in the Rust API; matrix market files and
//! permutation files are 1-based at the boundary.

mod io;

pub use io::{read_matrix_market, write_matrix_market};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use num_complex::Complex64;

/// Which entries a symmetric matrix actually stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// All structurally nonzero entries are stored.
    General,
    /// Only entries with `row >= col` are stored; the upper triangle is
    /// implied by symmetry (plain transpose, also for complex scalars).
    SymmetricLower,
}

/// Coordinate-format sparse matrix, the direct image of a matrix market file.
#[derive(Debug, Clone)]
pub struct CooMatrix<T> {
    pub n: usize,
    pub entries: Vec<(usize, usize, T)>,
    pub symmetry: Symmetry,
}

impl<T: Scalar> CooMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// Compressed sparse column matrix with strictly increasing row indices per
/// column and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<T>,
    pub symmetry: Symmetry,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[T]) {
        let lo = self.colptr[j];
        let hi = self.colptr[j + 1];
        (&self.rowind[lo..hi], &self.values[lo..hi])
    }

    /// Stored value at (i, j), if present.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (rows, vals) = self.col(j);
        rows.binary_search(&i).ok().map(|p| vals[p])
    }

    /// Number of stored entries counting the implied triangle of a
    /// symmetric-lower matrix, i.e. the nonzero count of the full matrix.
    pub fn nnz_full(&self) -> usize {
        match self.symmetry {
            Symmetry::General => self.nnz(),
            Symmetry::SymmetricLower => {
                let diag = (0..self.n)
                    .filter(|&j| self.get(j, j).is_some())
                    .count();
                2 * self.nnz() - diag
            }
        }
    }

    /// Dense column-major expansion, honoring the symmetry flag. Intended for
    /// oracles and small matrices only.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.n;
        let mut a = vec![T::zero(); n * n];
        for j in 0..n {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                a[i + j * n] = v;
                if self.symmetry == Symmetry::SymmetricLower && i != j {
                    a[j + i * n] = v;
                }
            }
        }
        a
    }

    /// Largest entry modulus, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    /// The structural pattern of the stored entries (symmetry flag dropped).
    pub fn stored_pattern(&self) -> SparsityPattern {
        SparsityPattern {
            n: self.n,
            colptr: self.colptr.clone(),
            rowind: self.rowind.clone(),
        }
    }

    /// Promote a real matrix to the same matrix with complex entries.
    pub fn to_complex(&self) -> CscMatrix<Complex64> {
        CscMatrix {
            n: self.n,
            colptr: self.colptr.clone(),
            rowind: self.rowind.clone(),
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.re(), v.im()))
                .collect(),
            symmetry: self.symmetry,
        }
    }

    /// Iterate stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |j| {
            let (rows, vals) = self.col(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }
}

/// Values-free structural pattern in compressed-column form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.rowind.len()
    }

    pub fn col(&self, j: usize) -> &[usize] {
        &self.rowind[self.colptr[j]..self.colptr[j + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.col(j).binary_search(&i).is_ok()
    }
}

/// Assemble coordinate entries into CSC form. Duplicates are summed, columns
/// sorted, the symmetry flag carried through.
pub fn coord_to_csc<T: Scalar>(m: &CooMatrix<T>) -> CscMatrix<T> {
    let n = m.n;
    let mut per_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for &(i, j, v) in &m.entries {
        per_col[j].push((i, v));
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowind = Vec::new();
    let mut values = Vec::new();
    colptr.push(0);
    for col in &mut per_col {
        col.sort_by_key(|&(i, _)| i);
        let mut k = 0;
        while k < col.len() {
            let i = col[k].0;
            let mut v = col[k].1;
            k += 1;
            while k < col.len() && col[k].0 == i {
                v += col[k].1;
                k += 1;
            }
            rowind.push(i);
            values.push(v);
        }
        colptr.push(rowind.len());
    }
    CscMatrix {
        n,
        colptr,
        rowind,
        values,
        symmetry: m.symmetry,
    }
}

/// Entrywise `A = H - z*S` on the pattern of `H`. `S = None` means the
/// identity. Every stored entry of `S` must lie inside the pattern of `H`.
pub fn build_shifted<T: Scalar>(
    h: &CscMatrix<T>,
    s: Option<&CscMatrix<T>>,
    z: T,
) -> Result<CscMatrix<T>> {
    let mut a = h.clone();
    match s {
        None => {
            // implicit identity: the diagonal must be present in H
            for j in 0..a.n {
                let lo = a.colptr[j];
                let hi = a.colptr[j + 1];
                match a.rowind[lo..hi].binary_search(&j) {
                    Ok(p) => a.values[lo + p] -= z,
                    Err(_) => return Err(Error::ShiftPattern { i: j, j }),
                }
            }
        }
        Some(s) => {
            if s.n != h.n {
                return Err(Error::DimensionMismatch {
                    expected: h.n,
                    got: s.n,
                });
            }
            for j in 0..s.n {
                let (rows, vals) = s.col(j);
                let lo = a.colptr[j];
                let hi = a.colptr[j + 1];
                for (&i, &v) in rows.iter().zip(vals) {
                    match a.rowind[lo..hi].binary_search(&i) {
                        Ok(p) => a.values[lo + p] -= z * v,
                        Err(_) => return Err(Error::ShiftPattern { i, j }),
                    }
                }
            }
        }
    }
    Ok(a)
}

/// Structural union of `A` and `Aᵀ`: the full symmetric pattern on which the
/// elimination analysis runs. Values are discarded.
pub fn symmetrize_pattern<T: Scalar>(a: &CscMatrix<T>) -> SparsityPattern {
    let n = a.n;
    let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for &i in a.col(j).0 {
            cols[j].push(i);
            if i != j {
                cols[i].push(j);
            }
        }
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowind = Vec::new();
    colptr.push(0);
    for col in &mut cols {
        col.sort_unstable();
        col.dedup();
        rowind.extend_from_slice(col);
        colptr.push(rowind.len());
    }
    SparsityPattern { n, colptr, rowind }
}

/// Restrict a full symmetric matrix to canonical lower-triangular storage.
/// Symmetric-lower input is returned unchanged.
pub fn to_symmetric_lower<T: Scalar>(a: &CscMatrix<T>) -> CscMatrix<T> {
    if a.symmetry == Symmetry::SymmetricLower {
        return a.clone();
    }
    let n = a.n;
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowind = Vec::new();
    let mut values = Vec::new();
    colptr.push(0);
    for j in 0..n {
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            if i >= j {
                rowind.push(i);
                values.push(v);
            }
        }
        colptr.push(rowind.len());
    }
    CscMatrix {
        n,
        colptr,
        rowind,
        values,
        symmetry: Symmetry::SymmetricLower,
    }
}
