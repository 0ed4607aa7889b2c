//! Shortest augmenting path max-flow with explicit terminal nodes.
//!
//! Deliberately simple; used as a correctness reference and as the fallback
//! when the tree-search solver hits its augmentation guard.

use std::collections::VecDeque;

use super::{CutResult, FlowNetwork, Side};

struct Graph {
    adj: Vec<Vec<usize>>,
    head: Vec<usize>,
    cap: Vec<f64>,
}

impl Graph {
    fn add(&mut self, u: usize, v: usize, cap: f64, rev: f64) {
        self.adj[u].push(self.head.len());
        self.head.push(v);
        self.cap.push(cap);
        self.adj[v].push(self.head.len());
        self.head.push(u);
        self.cap.push(rev);
    }

    /// Predecessor arc of every node on a BFS tree from `s` over residual arcs.
    fn bfs(&self, s: usize) -> Vec<Option<usize>> {
        let mut pred = vec![None; self.adj.len()];
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.head[a];
                if !seen[v] && self.cap[a] > 0.0 {
                    seen[v] = true;
                    pred[v] = Some(a);
                    queue.push_back(v);
                }
            }
        }
        pred
    }
}

pub(super) fn run(net: &FlowNetwork) -> CutResult {
    let n = net.node_count();
    let (s, t) = (n, n + 1);
    let mut g = Graph {
        adj: vec![Vec::new(); n + 2],
        head: Vec::new(),
        cap: Vec::new(),
    };
    for i in 0..n {
        let (cs, ct) = net.terminal_caps(i);
        if cs > 0.0 {
            g.add(s, i, cs, 0.0);
        }
        if ct > 0.0 {
            g.add(i, t, ct, 0.0);
        }
    }
    for e in net.edges() {
        g.add(e.from, e.to, e.cap, e.rev_cap);
    }

    let mut flow = 0.0;
    loop {
        let pred = g.bfs(s);
        if pred[t].is_none() {
            let sides = (0..n)
                .map(|i| {
                    if pred[i].is_some() {
                        Side::Source
                    } else {
                        Side::Sink
                    }
                })
                .collect();
            return CutResult {
                max_flow: flow,
                sides,
            };
        }
        let mut bottleneck = f64::INFINITY;
        let mut v = t;
        while let Some(a) = pred[v] {
            bottleneck = bottleneck.min(g.cap[a]);
            v = g.head[a ^ 1];
        }
        let mut v = t;
        while let Some(a) = pred[v] {
            g.cap[a] -= bottleneck;
            g.cap[a ^ 1] += bottleneck;
            v = g.head[a ^ 1];
        }
        flow += bottleneck;
    }
}
