//! Integer max-flow (Dinic) for support-constrained couplings.

use std::collections::VecDeque;

/// Number of integer units per unit of probability mass.
pub(crate) const UNITS: u64 = 1 << 40;

/// Rounds a probability vector to integers summing to [`UNITS`]: floors,
/// then one extra unit per entry in order of decreasing mass (ties by lower
/// index). Entries below one unit are never rounded up, so no support is
/// created in the tails.
pub(crate) fn quantize(masses: &[f64]) -> Vec<u64> {
    let total: f64 = masses.iter().map(|m| m.max(0.0)).sum();
    if total <= 0.0 {
        return vec![0; masses.len()];
    }
    let scaled: Vec<f64> = masses
        .iter()
        .map(|m| m.max(0.0) / total * UNITS as f64)
        .collect();
    let mut units: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = units.iter().sum();
    let mut deficit = UNITS.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..masses.len()).filter(|&i| units[i] > 0).collect();
    order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if deficit == 0 {
            break;
        }
        units[i] += 1;
        deficit -= 1;
    }
    units
}

struct Edge {
    to: usize,
    cap: u64,
}

pub(crate) struct FlowNetwork {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl FlowNetwork {
    pub(crate) fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    /// Adds `from → to` with capacity `cap`; returns the edge id.
    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap });
        self.edges.push(Edge { to: from, cap: 0 });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow carried by edge `id` (its reverse residual capacity).
    pub(crate) fn flow(&self, id: usize) -> u64 {
        self.edges[id + 1].cap
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let to = self.edges[e].to;
                if self.edges[e].cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: u64) -> u64 {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.adj[v].len() {
            let e = self.adj[v][self.iter[v]];
            let to = self.edges[e].to;
            if self.edges[e].cap > 0 && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, pushed.min(self.edges[e].cap));
                if d > 0 {
                    self.edges[e].cap -= d;
                    self.edges[e ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    pub(crate) fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let mut total = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Bipartite feasibility: is there a coupling of integer marginals `a`, `b`
/// supported on `allowed(i, j)`? Returns the plan entries if so, otherwise
/// the unrouted amount.
pub(crate) fn bipartite(
    a: &[u64],
    b: &[u64],
    allowed: impl Fn(usize, usize) -> bool,
) -> std::result::Result<Vec<(usize, usize, u64)>, u64> {
    let (m, n) = (a.len(), b.len());
    let s = m + n;
    let t = s + 1;
    let mut net = FlowNetwork::new(m + n + 2);
    let total: u64 = a.iter().sum();
    for (i, &ai) in a.iter().enumerate() {
        if ai > 0 {
            net.add_edge(s, i, ai);
        }
    }
    for (j, &bj) in b.iter().enumerate() {
        if bj > 0 {
            net.add_edge(m + j, t, bj);
        }
    }
    let mut arcs = Vec::new();
    for i in (0..m).filter(|&i| a[i] > 0) {
        for j in (0..n).filter(|&j| b[j] > 0) {
            if allowed(i, j) {
                arcs.push((i, j, net.add_edge(i, m + j, u64::MAX)));
            }
        }
    }
    let flow = net.max_flow(s, t);
    if flow < total {
        return Err(total - flow);
    }
    Ok(arcs
        .into_iter()
        .filter_map(|(i, j, e)| {
            let f = net.flow(e);
            (f > 0).then_some((i, j, f))
        })
        .collect())
}
