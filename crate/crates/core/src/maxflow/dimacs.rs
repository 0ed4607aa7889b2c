//! DIMACS max-flow text format, for inspecting networks with external tools.
//!
//! Network nodes `0..n` are written as DIMACS ids `1..=n`; the source and sink
//! are `n + 1` and `n + 2`.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::FlowNetwork;
use crate::error::{Error, Result};

pub fn to_dimacs(net: &FlowNetwork) -> String {
    let n = net.node_count();
    let (s, t) = (n + 1, n + 2);
    let mut arcs = String::new();
    let mut m = 0;
    let mut arc = |u: usize, v: usize, cap: f64| {
        if cap > 0.0 {
            writeln!(arcs, "a {u} {v} {cap}").unwrap();
            m += 1;
        }
    };
    for i in 0..n {
        let (cs, ct) = net.terminal_caps(i);
        arc(s, i + 1, cs);
        arc(i + 1, t, ct);
    }
    for e in net.edges() {
        arc(e.from + 1, e.to + 1, e.cap);
        arc(e.to + 1, e.from + 1, e.rev_cap);
    }
    format!("p max {} {m}\nn {s} s\nn {t} t\n{arcs}", n + 2)
}

fn parse_err(line_no: usize, msg: &str) -> Error {
    Error::Format(format!("dimacs line {}: {msg}", line_no + 1))
}

/// Parses a DIMACS max-flow problem. Arcs into the source or out of the sink
/// cannot carry flow and are dropped; a direct source-to-sink arc becomes an
/// isolated node with equal terminal capacities.
pub fn from_dimacs(text: &str) -> Result<FlowNetwork> {
    let mut size = None;
    let mut source = None;
    let mut sink = None;
    let mut arcs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] | ["c", ..] => {}
            ["p", "max", n, _m] => {
                let n: usize = n.parse().map_err(|_| parse_err(no, "bad node count"))?;
                size = Some(n);
            }
            ["n", id, role] => {
                let id: usize = id.parse().map_err(|_| parse_err(no, "bad node id"))?;
                match *role {
                    "s" => source = Some(id),
                    "t" => sink = Some(id),
                    _ => return Err(parse_err(no, "node role must be s or t")),
                }
            }
            ["a", u, v, cap] => {
                let u: usize = u.parse().map_err(|_| parse_err(no, "bad arc tail"))?;
                let v: usize = v.parse().map_err(|_| parse_err(no, "bad arc head"))?;
                let cap: f64 = cap.parse().map_err(|_| parse_err(no, "bad capacity"))?;
                arcs.push((no, u, v, cap));
            }
            _ => return Err(parse_err(no, "unrecognized line")),
        }
    }
    let n = size.ok_or_else(|| Error::Format("missing problem line".into()))?;
    let s = source.ok_or_else(|| Error::Format("missing source designation".into()))?;
    let t = sink.ok_or_else(|| Error::Format("missing sink designation".into()))?;
    if s == t || !(1..=n).contains(&s) || !(1..=n).contains(&t) {
        return Err(Error::Format("invalid terminal ids".into()));
    }

    let index: BTreeMap<usize, usize> = (1..=n)
        .filter(|&id| id != s && id != t)
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let mut net = FlowNetwork::new(index.len());
    for (no, u, v, cap) in arcs {
        if !(1..=n).contains(&u) || !(1..=n).contains(&v) {
            return Err(parse_err(no, "arc endpoint out of range"));
        }
        match (u == s, v == t, u == t || v == s) {
            (_, _, true) => {}
            (true, true, _) => {
                let node = net.add_node();
                net.add_terminal_caps(node, cap, cap)?;
            }
            (true, false, _) => net.add_terminal_caps(index[&v], cap, 0.0)?,
            (false, true, _) => net.add_terminal_caps(index[&u], 0.0, cap)?,
            (false, false, _) => net.add_edge(index[&u], index[&v], cap, 0.0)?,
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxflow::solve_maxflow;

    #[test]
    fn round_trip_preserves_flow() {
        let mut net = FlowNetwork::new(3);
        net.add_terminal_caps(0, 5.0, 0.0).unwrap();
        net.add_terminal_caps(2, 0.0, 4.5).unwrap();
        net.add_edge(0, 1, 3.0, 1.0).unwrap();
        net.add_edge(1, 2, 2.0, 0.0).unwrap();
        net.add_edge(0, 2, 1.25, 0.0).unwrap();
        let text = to_dimacs(&net);
        assert!(text.starts_with("p max 5 6\nn 4 s\nn 5 t\n"));
        let back = from_dimacs(&text).unwrap();
        assert_eq!(solve_maxflow(&back).max_flow, solve_maxflow(&net).max_flow);
        assert_eq!(solve_maxflow(&net).max_flow, 3.25);
    }

    #[test]
    fn parses_conventional_file() {
        let text = "c tiny\np max 4 5\nn 1 s\nn 4 t\na 1 2 3\na 1 3 2\na 2 3 1\na 2 4 2\na 3 4 3\n";
        let net = from_dimacs(text).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(solve_maxflow(&net).max_flow, 5.0);
    }

    #[test]
    fn direct_terminal_arc_counts() {
        let net = from_dimacs("p max 2 1\nn 1 s\nn 2 t\na 1 2 7\na 2 1 3\n").unwrap();
        assert_eq!(solve_maxflow(&net).max_flow, 7.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(from_dimacs("p max 2 0\nn 1 s\n").is_err());
        assert!(from_dimacs("p max 2 1\nn 1 s\nn 2 t\na 1 9 1\n").is_err());
        assert!(from_dimacs("hello\n").is_err());
    }
}
