//! Dinic max-flow on f64 capacities.

use std::collections::VecDeque;

/// Residual capacities below this are treated as saturated.
pub const FLOW_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    rev: usize,
    cap: f64,
}

#[derive(Clone, Debug)]
pub struct MaxFlow {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl MaxFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        let rev_from = self.graph[to].len();
        let rev_to = self.graph[from].len();
        self.graph[from].push(Edge { to, rev: rev_from, cap });
        self.graph[to].push(Edge {
            to: from,
            rev: rev_to,
            cap: 0.0,
        });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        let mut queue = VecDeque::new();
        self.level[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > FLOW_EPS && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, f: f64) -> f64 {
        if v == t {
            return f;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            if cap > FLOW_EPS && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, f.min(cap));
                if d > 0.0 {
                    self.graph[v][i].cap -= d;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    pub fn run(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
    }
}

/// Maximum mass that can be moved from `supply` to `demand` along allowed
/// pairs. `allowed(i, j)` says whether supply atom `i` may feed demand atom `j`.
pub fn bipartite_transport(supply: &[f64], demand: &[f64], allowed: impl Fn(usize, usize) -> bool) -> f64 {
    let (a, b) = (supply.len(), demand.len());
    let (s, t) = (a + b, a + b + 1);
    let mut net = MaxFlow::new(a + b + 2);
    for (i, &w) in supply.iter().enumerate() {
        net.add_edge(s, i, w);
    }
    for (j, &w) in demand.iter().enumerate() {
        net.add_edge(a + j, t, w);
    }
    for i in 0..a {
        for j in 0..b {
            if allowed(i, j) {
                net.add_edge(i, a + j, f64::INFINITY);
            }
        }
    }
    net.run(s, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_network() {
        let mut net = MaxFlow::new(4);
        net.add_edge(0, 1, 3.0);
        net.add_edge(0, 2, 2.0);
        net.add_edge(1, 2, 1.0);
        net.add_edge(1, 3, 2.0);
        net.add_edge(2, 3, 3.0);
        assert_eq!(net.run(0, 3), 5.0);
    }

    #[test]
    fn transport_respects_allowed_pairs() {
        let f = bipartite_transport(&[0.5, 0.5], &[0.5, 0.5], |i, j| i == 0 && j == 1);
        assert_eq!(f, 0.5);
        let full = bipartite_transport(&[0.25, 0.75], &[0.5, 0.5], |_, _| true);
        assert!((full - 1.0).abs() < 1e-15);
    }
}
