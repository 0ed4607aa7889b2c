//! Search-tree augmenting path max-flow.
//!
//! Two trees are grown, one rooted at each terminal. When they touch, the
//! connecting path is augmented; nodes cut off from their tree by saturated
//! arcs become orphans and either find a new parent in the same tree or are
//! released as free nodes. Trees are reused between augmentations, which is
//! what makes this fast on grid-shaped vision graphs.

use std::collections::VecDeque;

use super::{sister, ResidualGraph, NONE};

const TERMINAL: usize = usize::MAX - 1;
const ORPHAN: usize = usize::MAX - 2;
const INFINITE_DIST: u32 = u32::MAX;

struct Trees {
    // arc from the node towards its parent, or NONE (free), TERMINAL, ORPHAN
    parent: Vec<usize>,
    in_sink: Vec<bool>,
    timestamp: Vec<u64>,
    dist: Vec<u32>,
    active: Vec<bool>,
    queue: VecDeque<usize>,
    orphans: VecDeque<usize>,
    time: u64,
}

impl Trees {
    fn activate(&mut self, node: usize) {
        if !self.active[node] {
            self.active[node] = true;
            self.queue.push_back(node);
        }
    }

    fn next_active(&mut self) -> Option<usize> {
        while let Some(i) = self.queue.pop_front() {
            self.active[i] = false;
            if self.parent[i] != NONE {
                return Some(i);
            }
        }
        None
    }
}

/// Runs to completion, returning the flow value, or `None` if more than
/// `max_augmentations` augmenting paths were needed.
pub(super) fn run(g: &mut ResidualGraph, max_augmentations: u64) -> Option<f64> {
    let n = g.first.len();
    let mut t = Trees {
        parent: vec![NONE; n],
        in_sink: vec![false; n],
        timestamp: vec![0; n],
        dist: vec![0; n],
        active: vec![false; n],
        queue: VecDeque::new(),
        orphans: VecDeque::new(),
        time: 0,
    };
    for i in 0..n {
        if g.tr_cap[i] != 0.0 {
            t.in_sink[i] = g.tr_cap[i] < 0.0;
            t.parent[i] = TERMINAL;
            t.dist[i] = 1;
            t.activate(i);
        }
    }

    let mut flow = g.base_flow;
    let mut augmentations = 0u64;
    while let Some(i) = t.next_active() {
        let Some(middle) = grow(g, &mut t, i) else {
            continue;
        };
        // the current node may still have more paths to offer
        if !t.active[i] {
            t.active[i] = true;
            t.queue.push_front(i);
        }
        t.time += 1;
        flow += augment(g, &mut t, middle);
        augmentations += 1;
        if augmentations > max_augmentations {
            return None;
        }
        adopt_orphans(g, &mut t);
    }
    Some(flow)
}

/// Expands the tree containing `i` by one layer. Returns an arc leading from
/// a source-tree node to a sink-tree node when the trees meet.
fn grow(g: &ResidualGraph, t: &mut Trees, i: usize) -> Option<usize> {
    let sink_tree = t.in_sink[i];
    let mut a = g.first[i];
    while a != NONE {
        let arc = g.arcs[a];
        let residual = if sink_tree {
            g.arcs[sister(a)].cap
        } else {
            arc.cap
        };
        if residual > 0.0 {
            let j = arc.head;
            if t.parent[j] == NONE {
                t.in_sink[j] = sink_tree;
                t.parent[j] = sister(a);
                t.timestamp[j] = t.timestamp[i];
                t.dist[j] = t.dist[i] + 1;
                t.activate(j);
            } else if t.in_sink[j] != sink_tree {
                return Some(if sink_tree { sister(a) } else { a });
            } else if t.timestamp[j] <= t.timestamp[i] && t.dist[j] > t.dist[i] {
                // shorten j's path to its root
                t.parent[j] = sister(a);
                t.timestamp[j] = t.timestamp[i];
                t.dist[j] = t.dist[i] + 1;
            }
        }
        a = arc.next;
    }
    None
}

fn make_orphan_front(t: &mut Trees, node: usize) {
    t.parent[node] = ORPHAN;
    t.orphans.push_front(node);
}

fn augment(g: &mut ResidualGraph, t: &mut Trees, middle: usize) -> f64 {
    let mut bottleneck = g.arcs[middle].cap;

    // source tree: flow runs from the parent down to the child
    let mut i = g.arcs[sister(middle)].head;
    loop {
        let pa = t.parent[i];
        if pa == TERMINAL {
            break;
        }
        bottleneck = bottleneck.min(g.arcs[sister(pa)].cap);
        i = g.arcs[pa].head;
    }
    bottleneck = bottleneck.min(g.tr_cap[i]);

    // sink tree: flow runs from the child up to the parent
    let mut i = g.arcs[middle].head;
    loop {
        let pa = t.parent[i];
        if pa == TERMINAL {
            break;
        }
        bottleneck = bottleneck.min(g.arcs[pa].cap);
        i = g.arcs[pa].head;
    }
    bottleneck = bottleneck.min(-g.tr_cap[i]);

    g.arcs[sister(middle)].cap += bottleneck;
    g.arcs[middle].cap -= bottleneck;

    let mut i = g.arcs[sister(middle)].head;
    loop {
        let pa = t.parent[i];
        if pa == TERMINAL {
            break;
        }
        g.arcs[pa].cap += bottleneck;
        g.arcs[sister(pa)].cap -= bottleneck;
        let next = g.arcs[pa].head;
        if g.arcs[sister(pa)].cap <= 0.0 {
            make_orphan_front(t, i);
        }
        i = next;
    }
    g.tr_cap[i] -= bottleneck;
    if g.tr_cap[i] <= 0.0 {
        make_orphan_front(t, i);
    }

    let mut i = g.arcs[middle].head;
    loop {
        let pa = t.parent[i];
        if pa == TERMINAL {
            break;
        }
        g.arcs[sister(pa)].cap += bottleneck;
        g.arcs[pa].cap -= bottleneck;
        let next = g.arcs[pa].head;
        if g.arcs[pa].cap <= 0.0 {
            make_orphan_front(t, i);
        }
        i = next;
    }
    g.tr_cap[i] += bottleneck;
    if g.tr_cap[i] >= 0.0 {
        make_orphan_front(t, i);
    }

    bottleneck
}

fn adopt_orphans(g: &ResidualGraph, t: &mut Trees) {
    while let Some(i) = t.orphans.pop_front() {
        adopt(g, t, i);
    }
}

/// Distance from `j` to its tree root, or `INFINITE_DIST` if the path
/// runs through an orphan. Caches results with the current timestamp.
fn origin_distance(g: &ResidualGraph, t: &mut Trees, start: usize) -> u32 {
    let mut d: u32 = 0;
    let mut j = start;
    loop {
        if t.timestamp[j] == t.time {
            d += t.dist[j];
            break;
        }
        let pa = t.parent[j];
        d += 1;
        if pa == TERMINAL {
            t.timestamp[j] = t.time;
            t.dist[j] = 1;
            break;
        }
        if pa == ORPHAN {
            return INFINITE_DIST;
        }
        j = g.arcs[pa].head;
    }
    let mut mark = d;
    let mut j = start;
    while t.timestamp[j] != t.time {
        t.timestamp[j] = t.time;
        t.dist[j] = mark;
        mark -= 1;
        j = g.arcs[t.parent[j]].head;
    }
    d
}

fn adopt(g: &ResidualGraph, t: &mut Trees, i: usize) {
    let sink_tree = t.in_sink[i];
    let mut best = NONE;
    let mut best_dist = INFINITE_DIST;

    let mut a = g.first[i];
    while a != NONE {
        // a candidate parent j must be able to push flow towards i along the tree direction
        let residual = if sink_tree {
            g.arcs[a].cap
        } else {
            g.arcs[sister(a)].cap
        };
        let j = g.arcs[a].head;
        if residual > 0.0 && t.in_sink[j] == sink_tree && t.parent[j] != NONE {
            let d = origin_distance(g, t, j);
            if d < best_dist {
                best = a;
                best_dist = d;
            }
        }
        a = g.arcs[a].next;
    }

    if best != NONE {
        t.parent[i] = best;
        t.timestamp[i] = t.time;
        t.dist[i] = best_dist + 1;
        return;
    }

    t.parent[i] = NONE;
    let mut a = g.first[i];
    while a != NONE {
        let j = g.arcs[a].head;
        let pj = t.parent[j];
        if t.in_sink[j] == sink_tree && pj != NONE {
            let residual = if sink_tree {
                g.arcs[a].cap
            } else {
                g.arcs[sister(a)].cap
            };
            if residual > 0.0 {
                t.activate(j);
            }
            if pj != TERMINAL && pj != ORPHAN && g.arcs[pj].head == i {
                t.parent[j] = ORPHAN;
                t.orphans.push_back(j);
            }
        }
        a = g.arcs[a].next;
    }
}
