//! Compressed-row sparse matrices and a direct LU solver.
//!
//! The factorisation is a left-looking Gilbert-Peierls LU with threshold
//! partial pivoting, applied to a row-equilibrated copy of the matrix and a
//! fill-reducing column ordering computed on the symmetrised pattern.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use thiserror::Error;

/// Pivots smaller than this fraction of the largest equilibrated entry are
/// treated as numerically zero.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Diagonal entries within this factor of the column maximum are accepted as
/// pivots without a row interchange.
pub const DIAGONAL_PIVOT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("matrix dimension must be at least 1")]
    Empty,
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("matrix is numerically singular (pivot {pivot:e} at elimination step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("row {0} is identically zero")]
    ZeroRow(usize),
    #[error("conflicting Dirichlet values {first} and {second} on dof {dof}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
    #[error("row {0} has no stored diagonal entry")]
    MissingDiagonal(usize),
    #[error("non-finite value in linear system")]
    NonFinite,
}

/// Square matrix in compressed-row storage with sorted, unique column
/// indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        for &(row, col, v) in entries {
            if row >= n || col >= n {
                return Err(LinalgError::IndexOutOfRange { row, col, n });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite);
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        // Stable sort keeps the original summation order within duplicates.
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Zero-valued matrix on a given pattern. Column indices in each row must
    /// already be sorted and unique.
    pub fn from_pattern(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        let nnz = col_idx.len();
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Storage slot of entry `(i, j)`, if it is in the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n {
            return Err(LinalgError::DimensionMismatch { n: self.n, len: x.len() });
        }
        Ok((0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.n + 1];
        for &c in &self.col_idx {
            count[c + 1] += 1;
        }
        for i in 0..self.n {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let p = next[j];
                col_idx[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n: self.n,
            row_ptr: count,
            col_idx,
            values,
        }
    }
}

/// Imposes `x[dof] = value` for every constraint: constrained rows become
/// identity rows with the prescribed right-hand side, and constrained columns
/// are eliminated by moving their known contributions to `b`.
pub fn apply_dirichlet(
    a: &mut SparseMatrix,
    b: &mut [f64],
    constraints: &[(usize, f64)],
) -> Result<(), LinalgError> {
    let n = a.n;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { n, len: b.len() });
    }
    let mut prescribed: Vec<Option<f64>> = vec![None; n];
    for &(dof, value) in constraints {
        if dof >= n {
            return Err(LinalgError::IndexOutOfRange { row: dof, col: dof, n });
        }
        match prescribed[dof] {
            Some(first) if first != value => {
                return Err(LinalgError::ConflictingConstraint {
                    dof,
                    first,
                    second: value,
                })
            }
            _ => prescribed[dof] = Some(value),
        }
    }
    for i in 0..n {
        if prescribed[i].is_some() && a.position(i, i).is_none() {
            return Err(LinalgError::MissingDiagonal(i));
        }
    }
    for i in 0..n {
        let range = a.row_ptr[i]..a.row_ptr[i + 1];
        if let Some(v) = prescribed[i] {
            for p in range {
                a.values[p] = if a.col_idx[p] == i { 1.0 } else { 0.0 };
            }
            b[i] = v;
        } else {
            for p in range {
                if let Some(v) = prescribed[a.col_idx[p]] {
                    b[i] -= a.values[p] * v;
                    a.values[p] = 0.0;
                }
            }
        }
    }
    Ok(())
}

/// Fill-reducing column orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    ReverseCuthillMckee,
    #[default]
    MinimumDegree,
}

/// Computes a permutation `perm` (new position -> old index) from the
/// pattern of `A + A^T`.
pub fn compute_ordering(a: &SparseMatrix, kind: Ordering) -> Vec<usize> {
    match kind {
        Ordering::Natural => (0..a.n).collect(),
        Ordering::ReverseCuthillMckee => {
            let (groups, graph) = compressed_graph(a);
            expand(&groups, reverse_cuthill_mckee(&graph))
        }
        Ordering::MinimumDegree => {
            let (groups, graph) = compressed_graph(a);
            expand(&groups, minimum_degree(&graph))
        }
    }
}

/// Symmetrised adjacency with indistinguishable rows merged into
/// supervariables (e.g. the dofs of one mesh node).
fn compressed_graph(a: &SparseMatrix) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = a.n;
    let t = a.transpose();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = a.row(i).map(|(j, _)| j).chain(t.row(i).map(|(j, _)| j)).collect();
            v.push(i);
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let mut group_of: HashMap<&[usize], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut member = vec![0usize; n];
    for i in 0..n {
        let g = *group_of.entry(adj[i].as_slice()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
        member[i] = g;
    }
    let graph: Vec<Vec<usize>> = groups
        .iter()
        .enumerate()
        .map(|(g, m)| {
            let mut v: Vec<usize> = adj[m[0]].iter().map(|&j| member[j]).filter(|&h| h != g).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    adj.clear();
    (groups, graph)
}

fn expand(groups: &[Vec<usize>], order: Vec<usize>) -> Vec<usize> {
    order.into_iter().flat_map(|g| groups[g].iter().copied()).collect()
}

fn reverse_cuthill_mckee(graph: &[Vec<usize>]) -> Vec<usize> {
    let n = graph.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (graph[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(graph, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = graph[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (graph[u].len(), u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(graph: &[Vec<usize>], seed: usize) -> usize {
    let mut start = seed;
    let mut best_ecc = 0;
    for _ in 0..4 {
        let (far, ecc) = bfs_farthest(graph, start);
        if ecc <= best_ecc {
            break;
        }
        best_ecc = ecc;
        start = far;
    }
    start
}

fn bfs_farthest(graph: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; graph.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut far = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > far.1 || (d == far.1 && graph[v].len() < graph[far.0].len()) {
            far = (v, d);
        }
        for &u in &graph[v] {
            if dist[u] == usize::MAX {
                dist[u] = d + 1;
                queue.push_back(u);
            }
        }
    }
    far
}

/// Minimum-degree ordering on an explicit elimination graph.
fn minimum_degree(graph: &[Vec<usize>]) -> Vec<usize> {
    let n = graph.len();
    let mut adj: Vec<Vec<usize>> = graph.to_vec();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            merged.clear();
            let (a, b) = (&adj[u], &clique);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = if j == b.len() || (i < a.len() && a[i] < b[j]) {
                    i += 1;
                    a[i - 1]
                } else if i == a.len() || b[j] < a[i] {
                    j += 1;
                    b[j - 1]
                } else {
                    i += 1;
                    j += 1;
                    a[i - 1]
                };
                if next != u && next != v && !eliminated[next] {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// `P * diag(r) * A * Q = L * U` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    row_scale: Vec<f64>,
    col_perm: Vec<usize>,
    /// Original row index -> pivot position.
    row_perm_inv: Vec<usize>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

impl LuFactors {
    pub fn factor(a: &SparseMatrix, col_perm: &[usize]) -> Result<LuFactors, LinalgError> {
        let n = a.n;
        if col_perm.len() != n {
            return Err(LinalgError::DimensionMismatch { n, len: col_perm.len() });
        }
        let mut row_scale = vec![0.0; n];
        for (i, s) in row_scale.iter_mut().enumerate() {
            let m = a.row(i).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
            if !m.is_finite() {
                return Err(LinalgError::NonFinite);
            }
            if m == 0.0 {
                return Err(LinalgError::ZeroRow(i));
            }
            *s = 1.0 / m;
        }
        // Column-compressed copy of the equilibrated matrix.
        let at = a.transpose();
        let col = |j: usize| {
            let r = at.row_ptr[j]..at.row_ptr[j + 1];
            at.col_idx[r.clone()].iter().copied().zip(at.values[r].iter().copied())
        };

        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut l_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut l_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut u_idx: Vec<usize> = Vec::with_capacity(4 * a.nnz());
        let mut u_val: Vec<f64> = Vec::with_capacity(4 * a.nnz());

        let mut x = vec![0.0; n];
        let mut mark = vec![UNSET; n];
        let mut reach: Vec<usize> = Vec::with_capacity(n);
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let j = col_perm[k];

            // Symbolic: rows reachable from the nonzeros of A(:, j) through L.
            reach.clear();
            for (i, _) in col(j) {
                if mark[i] == k {
                    continue;
                }
                mark[i] = k;
                stack.push((i, 0));
                while let Some(&(node, mut cursor)) = stack.last() {
                    let mut pushed = false;
                    if pinv[node] != UNSET {
                        let lc = pinv[node];
                        let end = l_ptr_end(&l_ptr, l_idx.len(), lc);
                        // Skip the unit diagonal stored first.
                        let start = l_ptr[lc] + 1;
                        while start + cursor < end {
                            let r = l_idx[start + cursor];
                            cursor += 1;
                            if mark[r] != k {
                                mark[r] = k;
                                let top = stack.len() - 1;
                                stack[top].1 = cursor;
                                stack.push((r, 0));
                                pushed = true;
                                break;
                            }
                        }
                    }
                    if !pushed {
                        reach.push(node);
                        stack.pop();
                    }
                }
            }

            // Numeric: sparse lower-triangular solve in topological order.
            for (i, v) in col(j) {
                x[i] = v * row_scale[i];
            }
            for &i in reach.iter().rev() {
                let lc = pinv[i];
                if lc == UNSET {
                    continue;
                }
                let xi = x[i];
                if xi != 0.0 {
                    let end = l_ptr_end(&l_ptr, l_idx.len(), lc);
                    for p in l_ptr[lc] + 1..end {
                        x[l_idx[p]] -= l_val[p] * xi;
                    }
                }
            }

            let mut pivot_row = UNSET;
            let mut best = -1.0;
            for &i in reach.iter().rev() {
                if pinv[i] == UNSET {
                    if x[i].abs() > best {
                        best = x[i].abs();
                        pivot_row = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if pivot_row == UNSET || best <= SINGULAR_PIVOT_TOL {
                return Err(LinalgError::Singular {
                    step: k,
                    pivot: best.max(0.0),
                });
            }
            if pinv[j] == UNSET && mark[j] == k && x[j].abs() >= DIAGONAL_PIVOT_THRESHOLD * best {
                pivot_row = j;
            }
            let pivot = x[pivot_row];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[pivot_row] = k;
            l_idx.push(pivot_row);
            l_val.push(1.0);
            for &i in reach.iter().rev() {
                if pinv[i] == UNSET {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
        for r in l_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(LuFactors {
            n,
            row_scale,
            col_perm: col_perm.to_vec(),
            row_perm_inv: pinv,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries in `L + U`.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { n, len: b.len() });
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.row_perm_inv[i]] = b[i] * self.row_scale[i];
        }
        for k in 0..n {
            let yk = y[k];
            if yk != 0.0 {
                for p in self.l_ptr[k] + 1..self.l_ptr[k + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let end = self.u_ptr[k + 1];
            // Diagonal is stored last in each column.
            y[k] /= self.u_val[end - 1];
            let yk = y[k];
            if yk != 0.0 {
                for p in self.u_ptr[k]..end - 1 {
                    y[self.u_idx[p]] -= self.u_val[p] * yk;
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.col_perm[k]] = y[k];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(x)
    }

    /// Solve followed by one step of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = self.solve(b)?;
        let ax = a.matvec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = self.solve(&r)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        Ok(x)
    }
}

fn l_ptr_end(l_ptr: &[usize], len: usize, col: usize) -> usize {
    if col + 1 < l_ptr.len() {
        l_ptr[col + 1]
    } else {
        len
    }
}

/// Solves `A x = b` with a fresh minimum-degree ordering.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.n {
        return Err(LinalgError::DimensionMismatch { n: a.n, len: b.len() });
    }
    let perm = compute_ordering(a, Ordering::MinimumDegree);
    LuFactors::factor(a, &perm)?.solve_refined(a, b)
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
