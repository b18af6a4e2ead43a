//! Symbolic analysis: elimination tree, postorder, supernode detection and
//! the block nonzero structure of the factor.
//!
//! The analysis runs on the permuted, postordered pattern. Column-level fill
//! is computed first, supernodes are detected on the filled columns, and the
//! block structure is then rebuilt by a supernode-level pass so the final
//! pattern is closed: for any two block rows `I, J` of a supernodal column,
//! every row of block `(I, K)` also appears in block `(I, J)`. The selected
//! inversion gather relies on this.

use crate::error::{Error, Result};
use crate::sparse::SparsityPattern;

/// Contiguous column blocks covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupernodePartition {
    /// `nsup + 1` offsets; supernode `k` spans columns `col_starts[k]..col_starts[k+1]`.
    pub col_starts: Vec<usize>,
    /// Column to supernode index.
    pub col_to_sup: Vec<usize>,
}

impl SupernodePartition {
    pub fn from_starts(col_starts: Vec<usize>) -> Self {
        let n = *col_starts.last().expect("nonempty starts");
        let mut col_to_sup = vec![0usize; n];
        for k in 0..col_starts.len() - 1 {
            for j in col_starts[k]..col_starts[k + 1] {
                col_to_sup[j] = k;
            }
        }
        SupernodePartition {
            col_starts,
            col_to_sup,
        }
    }

    pub fn nsup(&self) -> usize {
        self.col_starts.len() - 1
    }

    pub fn n(&self) -> usize {
        *self.col_starts.last().unwrap()
    }

    pub fn cols(&self, k: usize) -> std::ops::Range<usize> {
        self.col_starts[k]..self.col_starts[k + 1]
    }

    pub fn start(&self, k: usize) -> usize {
        self.col_starts[k]
    }

    pub fn width(&self, k: usize) -> usize {
        self.col_starts[k + 1] - self.col_starts[k]
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.nsup()).map(|k| self.width(k)).collect()
    }
}

/// One nonzero block row of a supernodal column: the supernode it lies in and
/// the explicit, sorted set of global row indices that are present. Rows are
/// not required to be contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRow {
    pub sup: usize,
    pub rows: Vec<usize>,
}

/// Block nonzero structure of the lower factor: for each supernodal column,
/// its nonzero block rows below the diagonal, sorted by supernode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPattern {
    pub columns: Vec<Vec<BlockRow>>,
}

impl BlockPattern {
    pub fn nsup(&self) -> usize {
        self.columns.len()
    }

    /// Block rows of column `k`.
    pub fn blocks(&self, k: usize) -> &[BlockRow] {
        &self.columns[k]
    }

    /// The ancestor set `C(k)`: supernodes of the nonzero block rows below `k`.
    /// For symmetric structure the row and column contributions coincide.
    pub fn reach(&self, k: usize) -> Vec<usize> {
        self.columns[k].iter().map(|b| b.sup).collect()
    }

    /// Find the block row of column `k` lying in supernode `i`.
    pub fn block(&self, i: usize, k: usize) -> Option<&BlockRow> {
        self.columns[k]
            .binary_search_by_key(&i, |b| b.sup)
            .ok()
            .map(|p| &self.columns[k][p])
    }

    /// Scalar nonzero count of the lower factor including the dense
    /// lower-triangular part of each diagonal block.
    pub fn nnz_lower(&self, part: &SupernodePartition) -> usize {
        let mut nnz = 0;
        for k in 0..self.nsup() {
            let w = part.width(k);
            let below: usize = self.columns[k].iter().map(|b| b.rows.len()).sum();
            nnz += w * (w + 1) / 2 + below * w;
        }
        nnz
    }
}

/// Elimination tree over supernodes: the parent of `k` is the first nonzero
/// block row below its diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationTree {
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
}

impl EliminationTree {
    pub fn from_parents(parent: Vec<Option<usize>>) -> Self {
        let n = parent.len();
        let mut children = vec![Vec::new(); n];
        for (k, &p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[p].push(k);
            }
        }
        let mut depth = vec![0usize; n];
        // parent(k) > k, so a reverse sweep sees parents first
        for k in (0..n).rev() {
            if let Some(p) = parent[k] {
                depth[k] = depth[p] + 1;
            }
        }
        EliminationTree {
            parent,
            children,
            depth,
        }
    }

    pub fn from_block_pattern(bp: &BlockPattern) -> Self {
        let parent = bp
            .columns
            .iter()
            .map(|blocks| blocks.first().map(|b| b.sup))
            .collect();
        Self::from_parents(parent)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Tree height: number of nodes on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.depth.iter().map(|d| d + 1).max().unwrap_or(0)
    }
}

/// Column-level elimination tree of a structurally symmetric pattern, with
/// path compression over a virtual-ancestor array.
pub fn column_etree(pattern: &SparsityPattern) -> Vec<Option<usize>> {
    let n = pattern.n;
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for j in 0..n {
        for &i in pattern.col(j) {
            if i >= j {
                continue;
            }
            let mut r = i;
            while r != usize::MAX && ancestor[r] != j {
                let next = ancestor[r];
                ancestor[r] = j;
                if parent[r] == usize::MAX {
                    parent[r] = j;
                }
                r = next;
            }
        }
    }
    parent
        .into_iter()
        .map(|p| if p == usize::MAX { None } else { Some(p) })
        .collect()
}

/// Postorder of a forest given as a parent array. Children are visited in
/// ascending index order, so ties resolve toward the smaller index. Returns
/// the order as new→old: `order[k]` is the node placed at position `k`.
pub fn postorder(parent: &[Option<usize>]) -> Vec<usize> {
    let n = parent.len();
    let mut children = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for (k, &p) in parent.iter().enumerate() {
        match p {
            Some(p) => children[p].push(k),
            None => roots.push(k),
        }
    }
    let mut order = Vec::with_capacity(n);
    // stack entries: (node, next child position)
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for &root in &roots {
        stack.push((root, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < children[node].len() {
                let c = children[node][*next];
                *next += 1;
                stack.push((c, 0));
            } else {
                order.push(node);
                stack.pop();
            }
        }
    }
    order
}

/// Filled column structures of the factor: for each column `j`, the sorted
/// set of row indices `i >= j` with `L[i,j]` structurally nonzero, fill
/// included. The diagonal is always present.
#[derive(Debug, Clone)]
pub struct FilledColumns {
    pub structs: Vec<Vec<usize>>,
}

impl FilledColumns {
    pub fn nnz(&self) -> usize {
        self.structs.iter().map(|s| s.len()).sum()
    }
}

/// Column-level symbolic factorization by merging child structures up the
/// elimination tree.
pub fn column_fill(pattern: &SparsityPattern) -> FilledColumns {
    let n = pattern.n;
    let parent = column_etree(pattern);
    let mut children = vec![Vec::new(); n];
    for (k, &p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[p].push(k);
        }
    }
    let mut structs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        let mut s: Vec<usize> = pattern.col(j).iter().copied().filter(|&i| i >= j).collect();
        if s.binary_search(&j).is_err() {
            s.push(j);
            s.sort_unstable();
        }
        for &c in &children[j] {
            let merged = merge_sorted(&s, structs[c].iter().copied().filter(|&i| i > c && i != j));
            s = merged;
        }
        structs[j] = s;
    }
    FilledColumns { structs }
}

fn merge_sorted(a: &[usize], b: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len());
    let mut it_a = a.iter().copied().peekable();
    let mut it_b = b.peekable();
    loop {
        match (it_a.peek(), it_b.peek()) {
            (Some(&x), Some(&y)) => {
                if x < y {
                    out.push(x);
                    it_a.next();
                } else if y < x {
                    out.push(y);
                    it_b.next();
                } else {
                    out.push(x);
                    it_a.next();
                    it_b.next();
                }
            }
            (Some(_), None) => {
                out.extend(it_a);
                break;
            }
            (None, Some(_)) => {
                out.extend(it_b);
                break;
            }
            (None, None) => break,
        }
    }
    out
}

/// Group filled columns into supernodes. A candidate group of adjacent
/// columns is kept when the padding it introduces — explicit zeros stored in
/// the dense diagonal block and in the union row set — stays within
/// `relax_fill_ratio` of the stored entries and the group has at most
/// `relax_max_cols` columns. With `relax_fill_ratio = 0` only structurally
/// identical columns merge (strict mode).
pub fn detect_supernodes(
    filled: &FilledColumns,
    relax_max_cols: usize,
    relax_fill_ratio: f64,
) -> SupernodePartition {
    let n = filled.structs.len();
    assert!(relax_max_cols >= 1, "relax_max_cols must be positive");
    let mut starts = vec![0usize];
    let mut s = 0;
    while s < n {
        let mut e = s;
        // union of row indices beyond the current group end
        let mut nnz_sum = filled.structs[s].len();
        loop {
            let cand = e + 1;
            if cand >= n || cand - s + 1 > relax_max_cols {
                break;
            }
            let w = cand - s + 1;
            let nnz_cand = nnz_sum + filled.structs[cand].len();
            let mut union: Vec<usize> = Vec::new();
            for j in s..=cand {
                union = merge_sorted(
                    &union,
                    filled.structs[j].iter().copied().filter(|&i| i > cand),
                );
            }
            let stored = w * (w + 1) / 2 + w * union.len();
            let zeros = stored - nnz_cand;
            let ok = zeros == 0 || (zeros as f64) <= relax_fill_ratio * (stored as f64);
            if !ok {
                break;
            }
            e = cand;
            nnz_sum = nnz_cand;
        }
        starts.push(e + 1);
        s = e + 1;
    }
    SupernodePartition::from_starts(starts)
}

/// Supernode-level symbolic factorization: the block nonzero structure of the
/// lower factor including fill, closed under the partition. Row contributions
/// propagate along the supernodal elimination tree, which also closes any
/// padding a relaxed partition introduced.
pub fn symbolic_factor(pattern: &SparsityPattern, part: &SupernodePartition) -> BlockPattern {
    let nsup = part.nsup();
    let mut pending: Vec<Vec<Vec<usize>>> = vec![Vec::new(); nsup];
    let mut columns: Vec<Vec<BlockRow>> = Vec::with_capacity(nsup);
    for k in 0..nsup {
        let last = part.cols(k).end - 1;
        let mut rows: Vec<usize> = Vec::new();
        for j in part.cols(k) {
            rows = merge_sorted(&rows, pattern.col(j).iter().copied().filter(|&i| i > last));
        }
        for contrib in pending[k].drain(..) {
            rows = merge_sorted(&rows, contrib.into_iter());
        }
        if let Some(&first) = rows.first() {
            let parent = part.col_to_sup[first];
            let beyond: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&i| i >= part.cols(parent).end)
                .collect();
            if !beyond.is_empty() {
                pending[parent].push(beyond);
            }
            // the parent's full column range participates in later fill:
            // rows of k inside the parent spread across the parent's columns
        }
        // group by supernode
        let mut blocks: Vec<BlockRow> = Vec::new();
        for &r in &rows {
            let sup = part.col_to_sup[r];
            match blocks.last_mut() {
                Some(b) if b.sup == sup => b.rows.push(r),
                _ => blocks.push(BlockRow {
                    sup,
                    rows: vec![r],
                }),
            }
        }
        columns.push(blocks);
    }
    BlockPattern { columns }
}

/// Everything the numeric phases need from the analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbolic {
    pub n: usize,
    pub partition: SupernodePartition,
    pub blocks: BlockPattern,
    pub etree: EliminationTree,
    /// Scalar nonzeros of the lower factor (diagonal blocks counted as their
    /// dense lower triangle).
    pub nnz_lower: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeParams {
    pub relax_max_cols: usize,
    pub relax_fill_ratio: f64,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        AnalyzeParams {
            relax_max_cols: 40,
            relax_fill_ratio: 0.3,
        }
    }
}

impl AnalyzeParams {
    /// Strict supernodes: merge only structurally identical columns.
    pub fn strict() -> Self {
        AnalyzeParams {
            relax_max_cols: 40,
            relax_fill_ratio: 0.0,
        }
    }
}

/// Run the full symbolic phase on a permuted, postordered symmetric pattern.
pub fn analyze(pattern: &SparsityPattern, params: AnalyzeParams) -> Result<Symbolic> {
    if params.relax_max_cols < 1 {
        return Err(Error::Invalid("relax_max_cols must be >= 1".into()));
    }
    let filled = column_fill(pattern);
    let partition = detect_supernodes(&filled, params.relax_max_cols, params.relax_fill_ratio);
    let blocks = symbolic_factor(pattern, &partition);
    let etree = EliminationTree::from_block_pattern(&blocks);
    let nnz_lower = blocks.nnz_lower(&partition);
    Ok(Symbolic {
        n: pattern.n,
        partition,
        blocks,
        etree,
        nnz_lower,
    })
}

impl Symbolic {
    /// Plain-text report, one line per supernode, for fixture diffing.
    pub fn report(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for k in 0..self.partition.nsup() {
            let cols = self.partition.cols(k);
            let parent = match self.etree.parent[k] {
                Some(p) => format!("{}", p + 1),
                None => "root".into(),
            };
            write!(out, "sup {}: cols {}-{} parent {}", k + 1, cols.start + 1, cols.end, parent)
                .unwrap();
            for b in self.blocks.blocks(k) {
                let rows: Vec<String> = b.rows.iter().map(|r| (r + 1).to_string()).collect();
                write!(out, " [{}: {}]", b.sup + 1, rows.join(",")).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{coord_to_csc, symmetrize_pattern, CooMatrix, Symmetry};

    fn pattern_of(n: usize, lower: &[(usize, usize)]) -> SparsityPattern {
        let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|d| (d, d, 1.0)).collect();
        entries.extend(lower.iter().map(|&(i, j)| (i, j, 1.0)));
        let coo = CooMatrix {
            n,
            entries,
            symmetry: Symmetry::SymmetricLower,
        };
        symmetrize_pattern(&coord_to_csc(&coo))
    }

    #[test]
    fn etree_of_diagonal_is_all_roots() {
        let p = pattern_of(4, &[]);
        let parent = column_etree(&p);
        assert!(parent.iter().all(|p| p.is_none()));
    }

    #[test]
    fn etree_of_tridiagonal_is_a_chain() {
        let p = pattern_of(5, &[(1, 0), (2, 1), (3, 2), (4, 3)]);
        let parent = column_etree(&p);
        for k in 0..4 {
            assert_eq!(parent[k], Some(k + 1));
        }
        assert_eq!(parent[4], None);
    }

    #[test]
    fn postorder_of_chain_is_identity() {
        let parent = vec![Some(1), Some(2), None];
        assert_eq!(postorder(&parent), vec![0, 1, 2]);
    }

    #[test]
    fn postorder_prefers_smaller_child() {
        // leaves 0,1 under root 2
        let parent = vec![Some(2), Some(2), None];
        assert_eq!(postorder(&parent), vec![0, 1, 2]);
    }

    #[test]
    fn postorder_keeps_subtrees_contiguous() {
        // random-ish trees checked against a brute-force contiguity predicate
        let cases: Vec<Vec<Option<usize>>> = vec![
            vec![Some(4), Some(4), Some(5), Some(5), Some(9), Some(9), Some(8), Some(8), Some(9), None],
            vec![Some(9), Some(3), Some(3), Some(7), Some(7), Some(6), Some(9), Some(9), None, Some(8)],
            vec![None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(2), Some(3), Some(3), Some(4)],
        ];
        for parent in cases {
            let order = postorder(&parent);
            let n = parent.len();
            let mut pos = vec![0usize; n];
            for (k, &v) in order.iter().enumerate() {
                pos[v] = k;
            }
            // descendant set of each node must occupy positions
            // [pos[node] - |desc|, pos[node])
            let mut desc = vec![Vec::new(); n];
            for v in 0..n {
                let mut a = parent[v];
                while let Some(p) = a {
                    desc[p].push(v);
                    a = parent[p];
                }
            }
            for v in 0..n {
                for &d in &desc[v] {
                    assert!(pos[d] < pos[v], "descendant after ancestor");
                    assert!(
                        pos[v] - pos[d] <= desc[v].len(),
                        "subtree of {v} not contiguous"
                    );
                }
            }
        }
    }

    #[test]
    fn dense_matrix_is_one_supernode() {
        let mut lower = Vec::new();
        for j in 0..6 {
            for i in j + 1..6 {
                lower.push((i, j));
            }
        }
        let p = pattern_of(6, &lower);
        let filled = column_fill(&p);
        let part = detect_supernodes(&filled, 100, 0.0);
        assert_eq!(part.nsup(), 1);
        assert_eq!(part.widths(), vec![6]);
    }

    #[test]
    fn diagonal_strict_is_singletons() {
        let p = pattern_of(6, &[]);
        let filled = column_fill(&p);
        let part = detect_supernodes(&filled, 40, 0.0);
        assert_eq!(part.nsup(), 6);
    }

    #[test]
    fn diagonal_relaxed_merges_under_cap() {
        // merging diagonal columns only adds zeros inside the diagonal block;
        // with ratio 1.0 the three-column cap decides the shape
        let p = pattern_of(6, &[]);
        let filled = column_fill(&p);
        let part = detect_supernodes(&filled, 3, 1.0);
        assert_eq!(part.widths(), vec![3, 3]);
    }

    #[test]
    fn tridiagonal_blocks_have_no_fill() {
        // singleton supernodes supplied explicitly
        let p = pattern_of(4, &[(1, 0), (2, 1), (3, 2)]);
        let part = SupernodePartition::from_starts(vec![0, 1, 2, 3, 4]);
        let bp = symbolic_factor(&p, &part);
        for k in 0..3 {
            assert_eq!(bp.blocks(k).len(), 1);
            assert_eq!(bp.blocks(k)[0].sup, k + 1);
            assert_eq!(bp.blocks(k)[0].rows, vec![k + 1]);
        }
        assert!(bp.blocks(3).is_empty());
    }

    #[test]
    fn arrow_with_hub_last_has_no_fill() {
        let n = 5;
        let lower: Vec<(usize, usize)> = (0..n - 1).map(|j| (n - 1, j)).collect();
        let p = pattern_of(n, &lower);
        let filled = column_fill(&p);
        let part = detect_supernodes(&filled, 40, 0.0);
        let bp = symbolic_factor(&p, &part);
        // each leading column sees only the hub
        for k in 0..part.nsup() - 1 {
            assert_eq!(bp.blocks(k).len(), 1);
            assert_eq!(bp.blocks(k)[0].rows, vec![n - 1]);
        }
        assert_eq!(bp.nnz_lower(&part), n + (n - 1));
    }

    /// Dense boolean LU without pivoting: the structural closure oracle.
    fn dense_symbolic_lu(n: usize, pattern: &SparsityPattern) -> Vec<bool> {
        let mut a = vec![false; n * n];
        for j in 0..n {
            for &i in pattern.col(j) {
                a[i + j * n] = true;
            }
            a[j + j * n] = true;
        }
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
        a
    }

    #[test]
    fn strict_blocks_match_dense_symbolic_oracle() {
        // random 12x12, ~30% density
        let n = 12;
        let mut lower = Vec::new();
        for j in 0..n {
            for i in j + 1..n {
                if (i * 37 + j * 61) % 10 < 3 {
                    lower.push((i, j));
                }
            }
        }
        let p = pattern_of(n, &lower);
        let filled = column_fill(&p);
        let part = detect_supernodes(&filled, 40, 0.0);
        let bp = symbolic_factor(&p, &part);
        let oracle = dense_symbolic_lu(n, &p);
        // scalar expansion of the block pattern == lower triangle of the oracle
        let mut got = vec![false; n * n];
        for k in 0..part.nsup() {
            for j in part.cols(k) {
                for i in j..part.cols(k).end {
                    got[i + j * n] = true;
                }
                for b in bp.blocks(k) {
                    for &i in &b.rows {
                        got[i + j * n] = true;
                    }
                }
            }
        }
        for j in 0..n {
            for i in j..n {
                assert_eq!(
                    got[i + j * n],
                    oracle[i + j * n],
                    "structure mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn parent_is_first_block_row_and_rows_are_ancestors() {
        let n = 12;
        let mut lower = Vec::new();
        for j in 0..n {
            for i in j + 1..n {
                if (i * 7 + j * 13) % 11 < 3 {
                    lower.push((i, j));
                }
            }
        }
        let p = pattern_of(n, &lower);
        let sym = analyze(&p, AnalyzeParams::default()).unwrap();
        for k in 0..sym.partition.nsup() {
            let blocks = sym.blocks.blocks(k);
            match sym.etree.parent[k] {
                Some(parent) => assert_eq!(blocks[0].sup, parent),
                None => assert!(blocks.is_empty()),
            }
            // every block row is an ancestor in the tree
            let mut ancestors = Vec::new();
            let mut a = sym.etree.parent[k];
            while let Some(p) = a {
                ancestors.push(p);
                a = sym.etree.parent[p];
            }
            for b in blocks {
                assert!(ancestors.contains(&b.sup), "block row {} of {} not an ancestor", b.sup, k);
            }
        }
        // supernode sizes cover all columns, col_to_sup inverts the starts
        assert_eq!(sym.partition.widths().iter().sum::<usize>(), n);
        for j in 0..n {
            let k = sym.partition.col_to_sup[j];
            assert!(sym.partition.cols(k).contains(&j));
        }
    }
}
