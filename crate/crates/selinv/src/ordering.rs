//! Fill-reducing symmetric orderings.
//!
//! The built-in ordering is classic (non-approximate) minimum degree on the
//! explicit elimination graph, with ties broken by smallest original index so
//! the result is deterministic. External orderings can be loaded from a file
//! of 1-based indices.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{CscMatrix, SparsityPattern, Symmetry};

/// A permutation of {0..n-1}. `new_to_old[k]` is the original index placed at
/// position `k`; `old_to_new` is its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub new_to_old: Vec<usize>,
    pub old_to_new: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let v: Vec<usize> = (0..n).collect();
        Permutation {
            new_to_old: v.clone(),
            old_to_new: v,
        }
    }

    /// Build from the new→old map, validating bijectivity.
    pub fn from_new_to_old(new_to_old: Vec<usize>) -> Result<Self> {
        let n = new_to_old.len();
        let mut old_to_new = vec![usize::MAX; n];
        for (new, &old) in new_to_old.iter().enumerate() {
            if old >= n {
                return Err(Error::InvalidPermutation {
                    reason: format!("index {} out of range for n = {}", old + 1, n),
                });
            }
            if old_to_new[old] != usize::MAX {
                return Err(Error::InvalidPermutation {
                    reason: format!("duplicate index {}", old + 1),
                });
            }
            old_to_new[old] = new;
        }
        Ok(Permutation {
            new_to_old,
            old_to_new,
        })
    }

    pub fn len(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_to_old.is_empty()
    }

    /// `self ∘ inner`: apply `inner` first, then `self` relabels its output.
    /// new_to_old of the composite maps a final position through both.
    pub fn compose(&self, inner: &Permutation) -> Permutation {
        let new_to_old: Vec<usize> = self
            .new_to_old
            .iter()
            .map(|&k| inner.new_to_old[k])
            .collect();
        Permutation::from_new_to_old(new_to_old).expect("composition of bijections")
    }
}

/// Classic minimum degree on a structurally symmetric pattern. Maintains the
/// elimination graph explicitly; adequate at the matrix sizes this crate
/// targets. Diagonal-only nodes have degree zero and come out first, in
/// index order, so a diagonal matrix maps to the identity.
pub fn order_minimum_degree(pattern: &SparsityPattern) -> Permutation {
    let n = pattern.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for &i in pattern.col(j) {
            if i != j {
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }

    let mut alive = vec![true; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        // external degree, ties by smallest original index
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for v in 0..n {
            if alive[v] && adj[v].len() < best_deg {
                best_deg = adj[v].len();
                best = v;
            }
        }
        let v = best;
        alive[v] = false;
        order.push(v);
        let neighbors = std::mem::take(&mut adj[v]);
        // eliminate v: its neighbors become a clique
        for &u in &neighbors {
            let merged: Vec<usize> = {
                let mut m = Vec::with_capacity(adj[u].len() + neighbors.len());
                let mut it_a = adj[u].iter().copied().filter(|&x| x != v).peekable();
                let mut it_b = neighbors.iter().copied().filter(|&x| x != u).peekable();
                loop {
                    match (it_a.peek(), it_b.peek()) {
                        (Some(&a), Some(&b)) => {
                            if a < b {
                                m.push(a);
                                it_a.next();
                            } else if b < a {
                                m.push(b);
                                it_b.next();
                            } else {
                                m.push(a);
                                it_a.next();
                                it_b.next();
                            }
                        }
                        (Some(_), None) => {
                            m.extend(it_a.by_ref());
                            break;
                        }
                        (None, Some(_)) => {
                            m.extend(it_b.by_ref());
                            break;
                        }
                        (None, None) => break,
                    }
                }
                m
            };
            adj[u] = merged;
        }
    }
    Permutation::from_new_to_old(order).expect("elimination order is a bijection")
}

/// Symmetric two-sided permutation `B[i,j] = A[p(i), p(j)]`. Lower-triangular
/// storage is re-canonicalized: entries whose images land in the upper
/// triangle are flipped back.
pub fn apply_symmetric_permutation<T: Scalar>(
    a: &CscMatrix<T>,
    p: &Permutation,
) -> Result<CscMatrix<T>> {
    if p.len() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: p.len(),
        });
    }
    let n = a.n;
    let mut per_col: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (i, j, v) in a.iter() {
        let ni = p.old_to_new[i];
        let nj = p.old_to_new[j];
        let (ni, nj) = if a.symmetry == Symmetry::SymmetricLower && ni < nj {
            (nj, ni)
        } else {
            (ni, nj)
        };
        per_col[nj].push((ni, v));
    }
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowind = Vec::new();
    let mut values = Vec::new();
    colptr.push(0);
    for col in &mut per_col {
        col.sort_by_key(|&(i, _)| i);
        for &(i, v) in col.iter() {
            rowind.push(i);
            values.push(v);
        }
        colptr.push(rowind.len());
    }
    Ok(CscMatrix {
        n,
        colptr,
        rowind,
        values,
        symmetry: a.symmetry,
    })
}

/// Load a permutation from a whitespace-separated file of 1-based indices.
pub fn load_permutation(path: impl AsRef<Path>) -> Result<Permutation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_permutation(&text)
}

/// Parse 1-based whitespace-separated indices into a permutation.
pub fn parse_permutation(text: &str) -> Result<Permutation> {
    let mut new_to_old = Vec::new();
    for tok in text.split_whitespace() {
        let v: usize = tok.parse().map_err(|_| Error::InvalidPermutation {
            reason: format!("token '{tok}' is not an integer"),
        })?;
        if v == 0 {
            return Err(Error::InvalidPermutation {
                reason: "indices are 1-based; found 0".into(),
            });
        }
        new_to_old.push(v - 1);
    }
    Permutation::from_new_to_old(new_to_old)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{coord_to_csc, symmetrize_pattern, CooMatrix};

    fn pattern_of(n: usize, entries: &[(usize, usize)]) -> SparsityPattern {
        let coo = CooMatrix {
            n,
            entries: entries.iter().map(|&(i, j)| (i, j, 1.0f64)).collect(),
            symmetry: Symmetry::General,
        };
        symmetrize_pattern(&coord_to_csc(&coo))
    }

    #[test]
    fn diagonal_orders_identity() {
        let p = pattern_of(4, &[(0, 0), (1, 1), (2, 2), (3, 3)]);
        let perm = order_minimum_degree(&p);
        assert_eq!(perm.new_to_old, vec![0, 1, 2, 3]);
    }

    /// Structural fill of eliminating `pattern` in the order `new_to_old`.
    fn fill_count(pattern: &SparsityPattern, order: &[usize]) -> usize {
        let n = pattern.n;
        let mut pos = vec![0usize; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        let mut a = vec![false; n * n];
        for j in 0..n {
            for &i in pattern.col(j) {
                a[pos[i] + pos[j] * n] = true;
            }
        }
        let before: usize = (0..n * n).filter(|&k| a[k]).count();
        for k in 0..n {
            for i in k + 1..n {
                if a[i + k * n] {
                    for j in k + 1..n {
                        if a[k + j * n] {
                            a[i + j * n] = true;
                        }
                    }
                }
            }
        }
        (0..n * n).filter(|&k| a[k]).count() - before
    }

    #[test]
    fn star_graph_orders_without_fill() {
        // arrow matrix with hub at column 0: leaves go first while the hub
        // still has high degree, and the result is fill-free
        let n = 6;
        let mut entries = vec![(0, 0)];
        for k in 1..n {
            entries.push((k, k));
            entries.push((k, 0));
        }
        let p = pattern_of(n, &entries);
        let perm = order_minimum_degree(&p);
        assert_eq!(fill_count(&p, &perm.new_to_old), 0);
        // brute force over all permutations confirms 0 is the minimum
        let mut idx: Vec<usize> = (0..n).collect();
        let mut min_fill = usize::MAX;
        permute_all(&mut idx, 0, &mut |order| {
            min_fill = min_fill.min(fill_count(&p, order));
        });
        assert_eq!(min_fill, 0);
        // the hub is never eliminated while more than one leaf remains
        let hub_pos = perm.new_to_old.iter().position(|&v| v == 0).unwrap();
        assert!(hub_pos >= n - 2, "hub eliminated too early: {:?}", perm.new_to_old);
    }

    fn permute_all(idx: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == idx.len() {
            f(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            permute_all(idx, k + 1, f);
            idx.swap(k, i);
        }
    }

    #[test]
    fn permutation_is_always_a_bijection() {
        let p = pattern_of(5, &[(0, 0), (1, 0), (2, 1), (3, 3), (4, 2), (4, 4)]);
        let perm = order_minimum_degree(&p);
        let mut sorted = perm.new_to_old.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn identity_permutation_leaves_matrix_unchanged() {
        let a = coord_to_csc(&CooMatrix {
            n: 3,
            entries: vec![(0, 0, 1.0), (2, 1, 4.0), (2, 2, 2.0)],
            symmetry: Symmetry::SymmetricLower,
        });
        let b = apply_symmetric_permutation(&a, &Permutation::identity(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn swap_on_2x2() {
        // [[a,b],[b,c]] under swap(0,1) becomes [[c,b],[b,a]]
        let a = coord_to_csc(&CooMatrix {
            n: 2,
            entries: vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, 3.0)],
            symmetry: Symmetry::SymmetricLower,
        });
        let p = Permutation::from_new_to_old(vec![1, 0]).unwrap();
        let b = apply_symmetric_permutation(&a, &p).unwrap();
        assert_eq!(b.get(0, 0), Some(3.0));
        assert_eq!(b.get(1, 0), Some(2.0));
        assert_eq!(b.get(1, 1), Some(1.0));
    }

    #[test]
    fn random_permutation_matches_dense() {
        // 9x9 general matrix, arbitrary permutation, against dense P A Pᵀ
        let n = 9;
        let mut entries = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if (i * 17 + j * 5) % 4 == 0 {
                    entries.push((i, j, (i * n + j) as f64 + 1.0));
                }
            }
        }
        let a = coord_to_csc(&CooMatrix {
            n,
            entries,
            symmetry: Symmetry::General,
        });
        let p = Permutation::from_new_to_old(vec![3, 7, 0, 5, 1, 8, 2, 6, 4]).unwrap();
        let b = apply_symmetric_permutation(&a, &p).unwrap();
        let ad = a.to_dense();
        let bd = b.to_dense();
        for nj in 0..n {
            for ni in 0..n {
                assert_eq!(bd[ni + n * nj], ad[p.new_to_old[ni] + n * p.new_to_old[nj]]);
            }
        }
    }

    #[test]
    fn parse_identity_and_cycle() {
        let p = parse_permutation("1 2 3").unwrap();
        assert_eq!(p.new_to_old, vec![0, 1, 2]);
        let p = parse_permutation("3 1 2").unwrap();
        assert_eq!(p.new_to_old, vec![2, 0, 1]);
        assert_eq!(p.old_to_new, vec![1, 2, 0]);
    }

    #[test]
    fn parse_rejects_duplicates() {
        assert!(matches!(
            parse_permutation("1 1 3"),
            Err(Error::InvalidPermutation { .. })
        ));
    }
}
