//! Sparse symmetric positive-definite factorization.
//!
//! The systems assembled by the parameterization stage are graph Laplacians
//! restricted to the free vertices. They are factored once with an envelope
//! (skyline) Cholesky after a reverse Cuthill-McKee reordering, which keeps the
//! profile narrow on mesh-like sparsity patterns, and then reused for every
//! right-hand side.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Symmetric matrix assembled from (row, col, value) contributions.
///
/// Only the lower triangle is stored; contributions to `(i, j)` and `(j, i)`
/// land in the same slot, so callers add each off-diagonal coupling once.
#[derive(Debug, Clone)]
pub struct SymmetricBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SymmetricBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![BTreeMap::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Adds `value` to entry `(i, j)` (and, implicitly, `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        *self.rows[r].entry(c).or_insert(0.0) += value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.rows[r].get(&c).copied().unwrap_or(0.0)
    }

    /// Dense product `A x`, used by tests and residual checks.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (r, row) in self.rows.iter().enumerate() {
            for (&c, &v) in row {
                y[r] += v * x[c];
                if c != r {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn factor(&self) -> Result<SparseCholesky> {
        SparseCholesky::new(self)
    }
}

/// Envelope Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// First stored column of each permuted row.
    first: Vec<usize>,
    /// Offset of each row's envelope in `values`.
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl SparseCholesky {
    fn new(a: &SymmetricBuilder) -> Result<Self> {
        let n = a.n;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, row) in a.rows.iter().enumerate() {
            for &c in row.keys() {
                if c != r {
                    adj[r].push(c);
                    adj[c].push(r);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (old, list) in adj.iter().enumerate() {
            let r = inv[old];
            for &nb in list {
                let c = inv[nb];
                if c < r {
                    first[r] = first[r].min(c);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for r in 0..n {
            offset.push(total);
            total += r - first[r] + 1;
        }
        offset.push(total);
        let mut values = vec![0.0; total];
        for (old_r, row) in a.rows.iter().enumerate() {
            for (&old_c, &v) in row {
                let (mut r, mut c) = (inv[old_r], inv[old_c]);
                if c > r {
                    std::mem::swap(&mut r, &mut c);
                }
                values[offset[r] + c - first[r]] += v;
            }
        }

        // Row-oriented (bordering) Cholesky over the envelope.
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut sum = values[offset[i] + j - fi];
                for k in start..j {
                    sum -= values[offset[i] + k - fi] * values[offset[j] + k - fj];
                }
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Solve(format!(
                            "matrix is not positive definite (pivot {sum:e} at row {})",
                            perm[i]
                        )));
                    }
                    values[offset[i] + i - fi] = sum.sqrt();
                } else {
                    values[offset[i] + j - fi] = sum / values[offset[j] + j - fj];
                }
            }
        }

        Ok(Self {
            n,
            perm,
            first,
            offset,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side has wrong length");
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            let mut sum = y[i];
            for k in fi..i {
                sum -= row[k - fi] * y[k];
            }
            y[i] = sum / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Reverse Cuthill-McKee ordering; returns `perm[new] = old`.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut current = seed;
    let mut best_ecc = 0;
    for _ in 0..8 {
        let (far, ecc) = farthest(adj, current);
        if ecc <= best_ecc {
            break;
        }
        best_ecc = ecc;
        current = far;
    }
    current
}

fn farthest(adj: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    best
}
