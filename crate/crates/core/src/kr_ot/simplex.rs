//! Dense transportation simplex with lexicographic perturbation.
//!
//! Supplies are perturbed to `a_i + ε` and the last demand to `b_n + mε`
//! with `ε` symbolic, so every basic flow of the perturbed problem is
//! strictly positive and the method cannot cycle. Flows carry their
//! `ε`-coefficient as an integer.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex {
    v: f64,
    e: i64,
}

impl Lex {
    fn sub(self, o: Lex) -> Lex {
        Lex {
            v: self.v - o.v,
            e: self.e - o.e,
        }
    }

    fn add(self, o: Lex) -> Lex {
        Lex {
            v: self.v + o.v,
            e: self.e + o.e,
        }
    }

    fn lt(self, o: Lex, tol: f64) -> bool {
        if self.v < o.v - tol {
            true
        } else if self.v > o.v + tol {
            false
        } else {
            self.e < o.e
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexSolution {
    /// `(i, j, mass)` with `mass > 0`.
    pub flows: Vec<(usize, usize, f64)>,
    /// Row and column potentials with `u_i + v_j <= C_ij`, equality on the
    /// basis.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

struct Tree {
    m: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<Lex>,
    adj: Vec<Vec<usize>>,
}

impl Tree {
    fn node_col(&self, j: usize) -> usize {
        self.m + j
    }

    fn insert(&mut self, slot: usize, cell: (usize, usize), f: Lex) {
        self.cells[slot] = cell;
        self.flow[slot] = f;
        let c = self.node_col(cell.1);
        self.adj[cell.0].push(slot);
        self.adj[c].push(slot);
    }

    fn remove(&mut self, slot: usize) {
        let (i, j) = self.cells[slot];
        let c = self.node_col(j);
        self.adj[i].retain(|&s| s != slot);
        self.adj[c].retain(|&s| s != slot);
    }

    fn potentials(&self, cost: &[f64], n: usize, u: &mut [f64], v: &mut [f64]) {
        let m = self.m;
        let mut seen = vec![false; m + n];
        let mut q = VecDeque::new();
        u[0] = 0.0;
        seen[0] = true;
        q.push_back(0);
        while let Some(node) = q.pop_front() {
            for &s in &self.adj[node] {
                let (i, j) = self.cells[s];
                let c = cost[i * n + j];
                if node < m {
                    let col = m + j;
                    if !seen[col] {
                        v[j] = c - u[i];
                        seen[col] = true;
                        q.push_back(col);
                    }
                } else if !seen[i] {
                    u[i] = c - v[j];
                    seen[i] = true;
                    q.push_back(i);
                }
            }
        }
    }

    /// Basis slots on the tree path from row `i` to column `j`.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let total = self.adj.len();
        let target = self.node_col(j);
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        let mut q = VecDeque::new();
        seen[i] = true;
        q.push_back(i);
        while let Some(node) = q.pop_front() {
            if node == target {
                break;
            }
            for &s in &self.adj[node] {
                let (r, c) = self.cells[s];
                let other = if node < self.m { self.node_col(c) } else { r };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = Some((node, s));
                    q.push_back(other);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = target;
        while node != i {
            let (p, s) = parent[node].expect("basis is a spanning tree");
            out.push(s);
            node = p;
        }
        out.reverse();
        out
    }
}

/// Solves `min Σ C_ij x_ij` over `x >= 0` with row sums `a` and column
/// sums `b` (`cost` row-major `m × n`).
pub(crate) fn solve(a: &[f64], b: &[f64], cost: &[f64]) -> Result<SimplexSolution> {
    let m = a.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty marginal".into()));
    }
    debug_assert_eq!(cost.len(), m * n);
    let mass: f64 = a.iter().sum();
    let tol_f = 1e-13 * mass.max(f64::MIN_POSITIVE);
    let cmax = cost.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
    let tol_c = 1e-13 * cmax.max(f64::MIN_POSITIVE);

    // north-west corner on the perturbed marginals
    let mut supply: Vec<Lex> = a.iter().map(|&v| Lex { v, e: 1 }).collect();
    let mut demand: Vec<Lex> = b.iter().map(|&v| Lex { v, e: 0 }).collect();
    demand[n - 1].e = m as i64;
    let size = m + n - 1;
    let mut tree = Tree {
        m,
        cells: vec![(0, 0); size],
        flow: vec![Lex { v: 0.0, e: 0 }; size],
        adj: vec![Vec::new(); m + n],
    };
    let (mut i, mut j) = (0, 0);
    for slot in 0..size {
        let row_first = !demand[j].lt(supply[i], tol_f);
        let x = if row_first { supply[i] } else { demand[j] };
        tree.insert(slot, (i, j), x);
        supply[i] = supply[i].sub(x);
        demand[j] = demand[j].sub(x);
        if slot + 1 == size {
            break;
        }
        if (row_first && i + 1 < m) || j + 1 == n {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let total = m * n;
    let block = ((total as f64).sqrt() as usize).max(16).min(total);
    let mut next = 0usize;
    let max_iter = 200 * (m + n) + 10_000;
    let mut iterations = 0;
    loop {
        tree.potentials(cost, n, &mut u, &mut v);
        // block pricing
        let mut best: Option<(f64, usize)> = None;
        let mut scanned = 0;
        while scanned < total {
            let len = block.min(total - scanned);
            for _ in 0..len {
                let k = next;
                next = (next + 1) % total;
                let r = cost[k] - u[k / n] - v[k % n];
                if r < -tol_c && best.is_none_or(|(b, _)| r < b) {
                    best = Some((r, k));
                }
            }
            scanned += len;
            if best.is_some() {
                break;
            }
        }
        let Some((_, k)) = best else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::InvalidArgument(format!(
                "transportation simplex did not converge in {max_iter} pivots"
            )));
        }
        let (ei, ej) = (k / n, k % n);
        let path = tree.path(ei, ej);
        // odd positions along the path (1-based) lose flow
        let mut leave: Option<usize> = None;
        for (p, &s) in path.iter().enumerate() {
            if p % 2 == 0 {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        tree.flow[s].lt(tree.flow[l], tol_f)
                            || (!tree.flow[l].lt(tree.flow[s], tol_f) && tree.cells[s] < tree.cells[l])
                    }
                };
                if better {
                    leave = Some(s);
                }
            }
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = tree.flow[leave];
        for (p, &s) in path.iter().enumerate() {
            tree.flow[s] = if p % 2 == 0 {
                tree.flow[s].sub(theta)
            } else {
                tree.flow[s].add(theta)
            };
        }
        tree.remove(leave);
        tree.insert(leave, (ei, ej), theta);
    }

    let mut flows: Vec<(usize, usize, f64)> = tree
        .cells
        .iter()
        .zip(&tree.flow)
        .filter(|(_, f)| f.v > tol_f)
        .map(|(&(i, j), f)| (i, j, f.v))
        .collect();
    flows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok(SimplexSolution {
        flows,
        u,
        v,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_perm(cost: &[f64], n: usize) -> f64 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        fn rec(k: usize, perm: &mut Vec<usize>, cost: &[f64], n: usize, best: &mut f64) {
            if k == n {
                let c: f64 = (0..n).map(|i| cost[i * n + perm[i]]).sum();
                *best = best.min(c);
                return;
            }
            for s in k..n {
                perm.swap(k, s);
                rec(k + 1, perm, cost, n, best);
                perm.swap(k, s);
            }
        }
        rec(0, &mut perm, cost, n, &mut best);
        best
    }

    #[test]
    fn degenerate_assignment_matches_enumeration() {
        // integer-valued costs create many ties
        let n = 6;
        let cost: Vec<f64> = (0..n * n).map(|k| ((k * 7 + 3) % 5) as f64).collect();
        let ones = vec![1.0; n];
        let s = solve(&ones, &ones, &cost).unwrap();
        let value: f64 = s.flows.iter().map(|&(i, j, x)| x * cost[i * n + j]).sum();
        assert!((value - brute_force_perm(&cost, n)).abs() < 1e-12);
        for i in 0..n {
            for j in 0..n {
                assert!(cost[i * n + j] - s.u[i] - s.v[j] >= -1e-12);
            }
        }
    }

    #[test]
    fn rectangular_balance() {
        let a = [0.5, 0.25, 0.25];
        let b = [0.2, 0.8];
        let cost = [1.0, 2.0, 3.0, 1.0, 0.5, 4.0];
        let s = solve(&a, &b, &cost).unwrap();
        let mut rows = [0.0; 3];
        let mut cols = [0.0; 2];
        for &(i, j, x) in &s.flows {
            rows[i] += x;
            cols[j] += x;
        }
        for (r, a) in rows.iter().zip(a) {
            assert!((r - a).abs() < 1e-15);
        }
        for (c, b) in cols.iter().zip(b) {
            assert!((c - b).abs() < 1e-15);
        }
        // optimum: row 2 -> col 0 (0.5), rest to col 1
        let value: f64 = s.flows.iter().map(|&(i, j, x)| x * cost[i * 2 + j]).sum();
        let dual: f64 = a.iter().zip(&s.u).map(|(x, y)| x * y).sum::<f64>()
            + b.iter().zip(&s.v).map(|(x, y)| x * y).sum::<f64>();
        assert!((value - dual).abs() < 1e-14);
        assert!((value - (0.2 * 0.5 + 0.05 * 4.0 + 0.5 * 2.0 + 0.25 * 1.0)).abs() < 1e-14 || value <= 1.55);
    }
}
