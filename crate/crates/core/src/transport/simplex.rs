//! Transportation simplex (the network simplex method specialised to the
//! complete bipartite graph) for balanced dense transport problems.

use crate::error::{LabError, Result};

/// Optimal basic solution of `min Σ c_ij q_ij` subject to row sums `supply`
/// and column sums `demand`. Returns the basic cells `(i, j, q_ij)` with
/// positive flow, in row-major order.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let (m, n) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * n);
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let mut solver = Simplex::new(supply, demand, cost);
    solver.run()?;
    let mut out: Vec<(usize, usize, f64)> = solver
        .cells
        .iter()
        .filter(|c| c.flow > 0.0)
        .map(|c| (c.row, c.col, c.flow))
        .collect();
    out.sort_by_key(|&(i, j, _)| (i, j));
    Ok(out)
}

#[derive(Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

const NONE: usize = usize::MAX;

struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    cells: Vec<Cell>,
    /// basis slot of cell `(i, j)`, or `NONE`.
    slot: Vec<usize>,
    /// tree adjacency: for node `v` (rows `0..m`, columns `m..m+n`) the basis slots
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    cursor: usize,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        // North-west corner start: a staircase of m + n - 1 cells, which is a
        // spanning tree even when some of them carry zero flow.
        let mut rem_a = supply.to_vec();
        let mut rem_b = demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let last_row = i == m - 1;
            let last_col = j == n - 1;
            if last_row && last_col {
                cells.push(Cell { row: i, col: j, flow: rem_a[i].max(0.0) });
                break;
            }
            if !last_row && (rem_a[i] <= rem_b[j] || last_col) {
                let q = rem_a[i].max(0.0);
                cells.push(Cell { row: i, col: j, flow: q });
                rem_b[j] -= q;
                rem_a[i] = 0.0;
                i += 1;
            } else {
                let q = rem_b[j].max(0.0);
                cells.push(Cell { row: i, col: j, flow: q });
                rem_a[i] -= q;
                rem_b[j] = 0.0;
                j += 1;
            }
        }
        let mut slot = vec![NONE; m * n];
        let mut adj = vec![Vec::new(); m + n];
        for (k, c) in cells.iter().enumerate() {
            slot[c.row * n + c.col] = k;
            adj[c.row].push(k);
            adj[m + c.col].push(k);
        }
        Self {
            m,
            n,
            cost,
            cells,
            slot,
            adj,
            u: vec![0.0; m],
            v: vec![0.0; n],
            cursor: 0,
        }
    }

    fn potentials(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut seen = vec![false; m + n];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = stack.pop() {
            for &k in &self.adj[node] {
                let c = self.cells[k];
                let cost = self.cost[c.row * n + c.col];
                let other = if node < m { m + c.col } else { c.row };
                if seen[other] {
                    continue;
                }
                seen[other] = true;
                if other >= m {
                    self.v[c.col] = cost - self.u[c.row];
                } else {
                    self.u[c.row] = cost - self.v[c.col];
                }
                stack.push(other);
            }
        }
    }

    fn reduced(&self, i: usize, j: usize) -> (f64, f64) {
        let c = self.cost[i * self.n + j];
        let r = c - self.u[i] - self.v[j];
        let scale = c.abs().max(self.u[i].abs()).max(self.v[j].abs());
        (r, scale)
    }

    /// Candidate-list pricing: scan blocks from the cursor and take the most
    /// negative reduced cost of the first block containing one. In Bland mode
    /// the first eligible cell in index order is taken.
    fn price(&mut self, bland: bool) -> Option<(usize, usize)> {
        let total = self.m * self.n;
        let block = ((total as f64).sqrt() as usize).max(32).min(total);
        let eligible = |s: &Self, idx: usize| -> Option<f64> {
            if s.slot[idx] != NONE {
                return None;
            }
            let (r, scale) = s.reduced(idx / s.n, idx % s.n);
            (r < -1e-12 * scale.max(f64::MIN_POSITIVE)).then_some(r)
        };
        if bland {
            return (0..total)
                .find(|&idx| eligible(self, idx).is_some())
                .map(|idx| (idx / self.n, idx % self.n));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0;
        let mut idx = self.cursor;
        while scanned < total {
            if let Some(r) = eligible(self, idx) {
                if best.is_none_or(|(_, b)| r < b) {
                    best = Some((idx, r));
                }
            }
            scanned += 1;
            idx += 1;
            if idx == total {
                idx = 0;
            }
            if scanned % block == 0 && best.is_some() {
                break;
            }
        }
        self.cursor = idx;
        best.map(|(idx, _)| (idx / self.n, idx % self.n))
    }

    /// Basis slots on the tree path from column node `m + col` to row node
    /// `row`, in order starting next to the column.
    fn tree_path(&self, row: usize, col: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent = vec![NONE; total];
        let mut seen = vec![false; total];
        let mut stack = vec![row];
        seen[row] = true;
        let target = self.m + col;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &k in &self.adj[node] {
                let c = self.cells[k];
                let other = if node < self.m { self.m + c.col } else { c.row };
                if !seen[other] {
                    seen[other] = true;
                    parent[other] = k;
                    stack.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = target;
        while node != row {
            let k = parent[node];
            path.push(k);
            let c = self.cells[k];
            node = if node < self.m { self.m + c.col } else { c.row };
        }
        path
    }

    fn run(&mut self) -> Result<()> {
        let max_iter = 50 * (self.m + self.n) * (self.m + self.n).max(20);
        let mut degenerate_run = 0usize;
        let bland_after = 20 * (self.m + self.n);
        for _ in 0..max_iter {
            self.potentials();
            let bland = degenerate_run > bland_after;
            let Some((i, j)) = self.price(bland) else {
                return Ok(());
            };
            let path = self.tree_path(i, j);
            // Cells alternate -, +, -, ... starting next to the column.
            let mut theta = f64::INFINITY;
            let mut leave = NONE;
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let f = self.cells[k].flow;
                    let better = f < theta
                        || (bland && f == theta && {
                            let (a, b) = (self.cells[k], self.cells[leave]);
                            (a.row, a.col) < (b.row, b.col)
                        });
                    if better {
                        theta = f;
                        leave = k;
                    }
                }
            }
            if theta <= 0.0 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for (pos, &k) in path.iter().enumerate() {
                let c = &mut self.cells[k];
                if pos % 2 == 0 {
                    c.flow = (c.flow - theta).max(0.0);
                } else {
                    c.flow += theta;
                }
            }
            let old = self.cells[leave];
            self.slot[old.row * self.n + old.col] = NONE;
            self.adj[old.row].retain(|&k| k != leave);
            self.adj[self.m + old.col].retain(|&k| k != leave);
            self.cells[leave] = Cell { row: i, col: j, flow: theta };
            self.slot[i * self.n + j] = leave;
            self.adj[i].push(leave);
            self.adj[self.m + j].push(leave);
        }
        Err(LabError::Numeric(
            "transportation simplex exceeded its iteration limit".into(),
        ))
    }
}
