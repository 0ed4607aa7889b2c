//! Two-terminal max-flow / min-cut.
//!
//! Networks carry per-node terminal capacities (`source -> node` and
//! `node -> sink`) plus directed edge pairs between nodes. The default solver
//! grows search trees from both terminals and repairs them by orphan
//! adoption; a shortest-augmenting-path solver is kept as a reference.

mod bk;
mod dimacs;
mod edmonds_karp;

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub use dimacs::{from_dimacs, to_dimacs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Source,
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    BoykovKolmogorov,
    EdmondsKarp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cap: f64,
    pub rev_cap: f64,
}

/// A directed capacitated graph with implicit source and sink terminals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowNetwork {
    terminals: Vec<(f64, f64)>,
    edges: Vec<Edge>,
}

fn check_cap(cap: f64) -> Result<()> {
    if cap.is_finite() && cap >= 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "capacity must be finite and non-negative, got {cap}"
        )))
    }
}

impl FlowNetwork {
    pub fn new(node_count: usize) -> Self {
        FlowNetwork {
            terminals: vec![(0.0, 0.0); node_count],
            edges: Vec::new(),
        }
    }

    pub fn add_node(&mut self) -> usize {
        self.terminals.push((0.0, 0.0));
        self.terminals.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.terminals.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(source -> node, node -> sink)` capacities.
    pub fn terminal_caps(&self, node: usize) -> (f64, f64) {
        self.terminals[node]
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node < self.terminals.len() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "node {node} out of range for a {}-node network",
                self.terminals.len()
            )))
        }
    }

    /// Adds to the terminal capacities of `node`.
    pub fn add_terminal_caps(&mut self, node: usize, source: f64, sink: f64) -> Result<()> {
        self.check_node(node)?;
        check_cap(source)?;
        check_cap(sink)?;
        let t = &mut self.terminals[node];
        t.0 += source;
        t.1 += sink;
        Ok(())
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64, rev_cap: f64) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        check_cap(cap)?;
        check_cap(rev_cap)?;
        if from == to {
            return Err(Error::Argument(format!("self loop on node {from}")));
        }
        self.edges.push(Edge {
            from,
            to,
            cap,
            rev_cap,
        });
        Ok(())
    }

    /// Capacity of the cut induced by `sides`: every source-to-sink crossing.
    pub fn cut_capacity(&self, sides: &[Side]) -> f64 {
        let mut total = 0.0;
        for (i, (s, t)) in self.terminals.iter().enumerate() {
            match sides[i] {
                Side::Source => total += t,
                Side::Sink => total += s,
            }
        }
        for e in &self.edges {
            match (sides[e.from], sides[e.to]) {
                (Side::Source, Side::Sink) => total += e.cap,
                (Side::Sink, Side::Source) => total += e.rev_cap,
                _ => {}
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub max_flow: f64,
    pub sides: Vec<Side>,
}

impl CutResult {
    pub fn side(&self, node: usize) -> Side {
        self.sides[node]
    }
}

pub fn solve_maxflow(net: &FlowNetwork) -> CutResult {
    solve_maxflow_with(net, Algorithm::default())
}

pub fn solve_maxflow_with(net: &FlowNetwork, algorithm: Algorithm) -> CutResult {
    match algorithm {
        Algorithm::BoykovKolmogorov => {
            let mut graph = ResidualGraph::build(net);
            // augmentation guard: node_count * edge_count * 64
            let bound = (net.node_count().max(1) as u64)
                .saturating_mul(net.edge_count().max(1) as u64)
                .saturating_mul(64);
            match bk::run(&mut graph, bound) {
                Some(flow) => CutResult {
                    max_flow: flow,
                    sides: graph.source_reachable(),
                },
                None => {
                    log::warn!(
                        "tree-search solver exceeded {bound} augmentations; \
                         falling back to shortest augmenting paths"
                    );
                    edmonds_karp::run(net)
                }
            }
        }
        Algorithm::EdmondsKarp => edmonds_karp::run(net),
    }
}

pub(crate) const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Arc {
    pub head: usize,
    pub next: usize,
    pub cap: f64,
}

/// Residual network in arena form. Arcs come in sister pairs `2e`, `2e + 1`;
/// terminal residuals are folded into one signed value per node (positive
/// means residual from the source, negative residual to the sink).
pub(crate) struct ResidualGraph {
    pub first: Vec<usize>,
    pub arcs: Vec<Arc>,
    pub tr_cap: Vec<f64>,
    pub base_flow: f64,
}

#[inline]
pub(crate) fn sister(a: usize) -> usize {
    a ^ 1
}

impl ResidualGraph {
    fn build(net: &FlowNetwork) -> Self {
        let n = net.node_count();
        let mut first = vec![NONE; n];
        let mut arcs = Vec::with_capacity(net.edge_count() * 2);
        for e in &net.edges {
            arcs.push(Arc {
                head: e.to,
                next: first[e.from],
                cap: e.cap,
            });
            first[e.from] = arcs.len() - 1;
            arcs.push(Arc {
                head: e.from,
                next: first[e.to],
                cap: e.rev_cap,
            });
            first[e.to] = arcs.len() - 1;
        }
        let mut base_flow = 0.0;
        let tr_cap = net
            .terminals
            .iter()
            .map(|&(s, t)| {
                base_flow += s.min(t);
                s - t
            })
            .collect();
        ResidualGraph {
            first,
            arcs,
            tr_cap,
            base_flow,
        }
    }

    pub fn out_arcs(&self, node: usize) -> OutArcs<'_> {
        OutArcs {
            arcs: &self.arcs,
            at: self.first[node],
        }
    }

    fn source_reachable(&self) -> Vec<Side> {
        let n = self.first.len();
        let mut sides = vec![Side::Sink; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| self.tr_cap[i] > 0.0).collect();
        for &i in &queue {
            sides[i] = Side::Source;
        }
        while let Some(i) = queue.pop_front() {
            for a in self.out_arcs(i) {
                let arc = self.arcs[a];
                if arc.cap > 0.0 && sides[arc.head] == Side::Sink {
                    sides[arc.head] = Side::Source;
                    queue.push_back(arc.head);
                }
            }
        }
        sides
    }
}

pub(crate) struct OutArcs<'a> {
    arcs: &'a [Arc],
    at: usize,
}

impl Iterator for OutArcs<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.at == NONE {
            return None;
        }
        let a = self.at;
        self.at = self.arcs[a].next;
        Some(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both(net: &FlowNetwork) -> [CutResult; 2] {
        [
            solve_maxflow_with(net, Algorithm::BoykovKolmogorov),
            solve_maxflow_with(net, Algorithm::EdmondsKarp),
        ]
    }

    #[test]
    fn single_node_takes_smaller_terminal() {
        let mut net = FlowNetwork::new(1);
        net.add_terminal_caps(0, 3.0, 5.0).unwrap();
        for r in both(&net) {
            assert_eq!(r.max_flow, 3.0);
            assert_eq!(r.sides, vec![Side::Sink]);
        }
    }

    #[test]
    fn bottleneck_edge() {
        let mut net = FlowNetwork::new(2);
        net.add_terminal_caps(0, 4.0, 0.0).unwrap();
        net.add_terminal_caps(1, 0.0, 4.0).unwrap();
        net.add_edge(0, 1, 1.0, 0.0).unwrap();
        for r in both(&net) {
            assert_eq!(r.max_flow, 1.0);
            assert_eq!(r.sides, vec![Side::Source, Side::Sink]);
            assert_eq!(net.cut_capacity(&r.sides), 1.0);
        }
    }

    #[test]
    fn empty_network() {
        let net = FlowNetwork::new(0);
        for r in both(&net) {
            assert_eq!(r.max_flow, 0.0);
            assert!(r.sides.is_empty());
        }
    }

    #[test]
    fn zero_capacity_node_is_sink_side() {
        let mut net = FlowNetwork::new(3);
        net.add_terminal_caps(0, 2.0, 0.0).unwrap();
        net.add_edge(0, 1, 5.0, 0.0).unwrap();
        for r in both(&net) {
            assert_eq!(r.max_flow, 0.0);
            assert_eq!(r.sides, vec![Side::Source, Side::Source, Side::Sink]);
        }
    }

    #[test]
    fn rejects_invalid_construction() {
        let mut net = FlowNetwork::new(2);
        assert!(net.add_edge(0, 2, 1.0, 1.0).is_err());
        assert!(net.add_edge(0, 1, -1.0, 1.0).is_err());
        assert!(net.add_edge(0, 1, f64::NAN, 1.0).is_err());
        assert!(net.add_edge(1, 1, 1.0, 1.0).is_err());
        assert!(net.add_terminal_caps(0, f64::INFINITY, 0.0).is_err());
        assert!(net.add_terminal_caps(5, 1.0, 0.0).is_err());
    }

    #[test]
    fn parallel_paths_and_reverse_flow() {
        // classic instance where a greedy path must be undone through a reverse arc
        let mut net = FlowNetwork::new(4);
        net.add_terminal_caps(0, 10.0, 0.0).unwrap();
        net.add_terminal_caps(1, 10.0, 0.0).unwrap();
        net.add_terminal_caps(2, 0.0, 10.0).unwrap();
        net.add_terminal_caps(3, 0.0, 10.0).unwrap();
        net.add_edge(0, 2, 4.0, 0.0).unwrap();
        net.add_edge(0, 3, 8.0, 0.0).unwrap();
        net.add_edge(1, 3, 9.0, 0.0).unwrap();
        net.add_edge(0, 1, 2.0, 0.0).unwrap();
        for r in both(&net) {
            assert_eq!(r.max_flow, 14.0);
            assert_eq!(net.cut_capacity(&r.sides), 14.0);
        }
    }

    #[test]
    fn real_valued_capacities() {
        let mut net = FlowNetwork::new(3);
        net.add_terminal_caps(0, 0.7, 0.1).unwrap();
        net.add_terminal_caps(1, 0.2, 0.3).unwrap();
        net.add_terminal_caps(2, 0.05, 0.9).unwrap();
        net.add_edge(0, 1, 0.25, 0.25).unwrap();
        net.add_edge(1, 2, 0.25, 0.25).unwrap();
        let [a, b] = both(&net);
        assert!((a.max_flow - b.max_flow).abs() < 1e-12);
        assert!((net.cut_capacity(&a.sides) - a.max_flow).abs() < 1e-12);
    }
}
