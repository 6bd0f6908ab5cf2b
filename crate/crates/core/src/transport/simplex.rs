//! Transportation simplex on a dense cost matrix.
//!
//! Degeneracy is removed by the classical symbolic perturbation of the
//! supplies (`a_i + ε`, last demand `+ m ε`): flows are carried as pairs
//! `(value, multiple of ε)` and compared lexicographically, so every basis is
//! non-degenerate and the method cannot cycle.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Dense row-major cost matrix.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || data.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("cost matrix shape or values".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, Copy)]
struct Lex {
    x: f64,
    k: i64,
}

impl Lex {
    fn sub(self, o: Lex) -> Lex {
        Lex { x: self.x - o.x, k: self.k - o.k }
    }

    fn add(self, o: Lex) -> Lex {
        Lex { x: self.x + o.x, k: self.k + o.k }
    }
}

/// Lexicographic comparison with round-off noise in the value ignored.
fn lex_cmp(a: Lex, b: Lex, tol: f64) -> Ordering {
    if (a.x - b.x).abs() > tol {
        a.x.partial_cmp(&b.x).unwrap()
    } else {
        a.k.cmp(&b.k)
    }
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    /// basic cells `(i, j, flow)` with positive flow
    pub entries: Vec<(usize, usize, f64)>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pivots: usize,
}

struct Basis {
    m: usize,
    cells: Vec<(usize, usize, Lex)>,
    /// node adjacency (rows `0..m`, columns `m..m+n`) by cell index
    adj: Vec<Vec<usize>>,
}

impl Basis {
    fn add(&mut self, i: usize, j: usize, flow: Lex) -> usize {
        let id = self.cells.len();
        self.cells.push((i, j, flow));
        self.adj[i].push(id);
        self.adj[self.m + j].push(id);
        id
    }

    /// Replaces cell `old` by `(i, j, flow)` in place.
    fn replace(&mut self, old: usize, i: usize, j: usize, flow: Lex) {
        let (oi, oj, _) = self.cells[old];
        self.adj[oi].retain(|&c| c != old);
        self.adj[self.m + oj].retain(|&c| c != old);
        self.cells[old] = (i, j, flow);
        self.adj[i].push(old);
        self.adj[self.m + j].push(old);
    }

    fn other(&self, cell: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[cell];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &CostMatrix, u: &mut [f64], v: &mut [f64]) {
        let m = self.m;
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &c in &self.adj[node] {
                let next = self.other(c, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j, _) = self.cells[c];
                if next >= m {
                    v[j] = cost.get(i, j) - u[i];
                } else {
                    u[i] = cost.get(i, j) - v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Cells on the tree path from row `i` to column `j`, in order.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut parent: Vec<Option<usize>> = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        let mut queue = VecDeque::from([i]);
        seen[i] = true;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &c in &self.adj[node] {
                let next = self.other(c, node);
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(c);
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let c = parent[node].expect("basis is a spanning tree");
            cells.push(c);
            node = self.other(c, node);
        }
        cells.reverse();
        cells
    }
}

/// Solves `min Σ c_ij x_ij` subject to row sums `a`, column sums `b`, `x ≥ 0`.
/// `a` and `b` must have equal totals.
pub fn solve(cost: &CostMatrix, a: &[f64], b: &[f64]) -> Result<SimplexSolution> {
    let (m, n) = (cost.rows(), cost.cols());
    if a.len() != m || b.len() != n || m == 0 || n == 0 {
        return Err(Error::InvalidInput("marginal lengths do not match the cost matrix".into()));
    }
    let scale = a.iter().chain(b).fold(0.0f64, |s, x| s.max(x.abs()));
    let tol = 1e-14 * scale.max(1e-300) * (m + n) as f64;

    // northwest corner on the perturbed marginals
    let mut basis = Basis { m, cells: Vec::with_capacity(m + n - 1), adj: vec![Vec::new(); m + n] };
    let supply = |i: usize| Lex { x: a[i], k: 1 };
    let demand = |j: usize| Lex { x: b[j], k: if j + 1 == n { m as i64 } else { 0 } };
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (supply(0), demand(0));
    loop {
        if i + 1 == m && j + 1 == n {
            basis.add(i, j, ra);
            break;
        }
        if j + 1 == n || (i + 1 < m && lex_cmp(ra, rb, tol) == Ordering::Less) {
            basis.add(i, j, ra);
            rb = rb.sub(ra);
            i += 1;
            ra = supply(i);
        } else {
            basis.add(i, j, rb);
            ra = ra.sub(rb);
            j += 1;
            rb = demand(j);
        }
    }

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let cmax = cost.max_abs().max(1e-300);
    let rc_tol = 1e-13 * cmax;
    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(64).min(total);
    let mut cursor = 0usize;
    let max_pivots = 50 * (m + n) * (1 + (m.min(n) as f64).sqrt() as usize) + 10_000;
    let mut pivots = 0;
    loop {
        basis.potentials(cost, &mut u, &mut v);
        // block search for an entering cell
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        while scanned < total {
            let end = (scanned + block).min(total);
            for _ in scanned..end {
                let (r, c) = (cursor / n, cursor % n);
                let rc = cost.get(r, c) - u[r] - v[c];
                if rc < -rc_tol && best.is_none_or(|(_, b)| rc < b) {
                    best = Some((cursor, rc));
                }
                cursor += 1;
                if cursor == total {
                    cursor = 0;
                }
            }
            scanned = end;
            if best.is_some() {
                break;
            }
        }
        let Some((enter, _)) = best else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::SolverStalled(max_pivots));
        }
        let (ei, ej) = (enter / n, enter % n);
        let path = basis.path(ei, ej);
        // odd positions along the path (0, 2, ...) lose flow
        let mut leave = path[0];
        for &c in path.iter().step_by(2) {
            if lex_cmp(basis.cells[c].2, basis.cells[leave].2, tol) == Ordering::Less {
                leave = c;
            }
        }
        let theta = basis.cells[leave].2;
        for (k, &c) in path.iter().enumerate() {
            let f = basis.cells[c].2;
            basis.cells[c].2 = if k % 2 == 0 { f.sub(theta) } else { f.add(theta) };
        }
        basis.replace(leave, ei, ej, theta);
    }

    let entries = basis
        .cells
        .iter()
        .filter(|&&(_, _, f)| f.x > tol)
        .map(|&(i, j, f)| (i, j, f.x))
        .collect();
    Ok(SimplexSolution { entries, u, v, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive optimum over permutations for uniform square problems.
    fn brute_assignment(cost: &CostMatrix) -> f64 {
        fn rec(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.rows() {
                *best = best.min(acc);
                return;
            }
            for j in 0..cost.cols() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.cols()], 0.0, &mut best);
        best / cost.rows() as f64
    }

    #[test]
    fn matches_assignment_enumeration() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / (1u64 << 53) as f64
        };
        for n in 2..=6 {
            let cost = CostMatrix::new(n, n, (0..n * n).map(|_| (next() * 10.0).round()).collect()).unwrap();
            let w = vec![1.0 / n as f64; n];
            let sol = solve(&cost, &w, &w).unwrap();
            let primal: f64 = sol.entries.iter().map(|&(i, j, x)| x * cost.get(i, j)).sum();
            assert!((primal - brute_assignment(&cost)).abs() < 1e-12);
            let dual: f64 = sol.u.iter().chain(&sol.v).sum::<f64>() / n as f64;
            assert!((primal - dual).abs() < 1e-12);
            for i in 0..n {
                for j in 0..n {
                    assert!(sol.u[i] + sol.v[j] <= cost.get(i, j) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn fully_degenerate_problem_terminates() {
        // constant costs and equal marginals: every basis is optimal
        let n = 20;
        let cost = CostMatrix::from_fn(n, n, |_, _| 1.0).unwrap();
        let w = vec![1.0 / n as f64; n];
        let sol = solve(&cost, &w, &w).unwrap();
        let mass: f64 = sol.entries.iter().map(|e| e.2).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
