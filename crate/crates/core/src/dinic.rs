//! Blocking-flow maximum flow.
//!
//! Two flavours live here: unit capacities on [`DirectedMultigraph`], where a
//! unit of flow is an arc flip, and real capacities on [`CapacitatedNetwork`],
//! used as the inner min-cut solver of the Dinkelbach ratio-cut oracle.

use std::collections::VecDeque;

use crate::error::{FlowError, Result};
use crate::graph::{ArcId, DirectedMultigraph, VertexId};

const UNREACHED: usize = usize::MAX;

/// Capacities (and residuals) below this are treated as zero.
pub const CAPACITY_EPS: f64 = 1e-12;

fn unit_levels(g: &DirectedMultigraph) -> Vec<usize> {
    let mut level = vec![UNREACHED; g.n()];
    let mut queue = VecDeque::new();
    level[g.s()] = 0;
    queue.push_back(g.s());
    while let Some(v) = queue.pop_front() {
        for &id in g.incident(v) {
            let a = g.arc(id);
            if !a.is_live() || a.is_ts_link() || a.from() != v {
                continue;
            }
            let w = a.to();
            if level[w] == UNREACHED {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

/// Length of the shortest residual `s`-`t` path avoiding `(t, s)` links.
pub fn residual_distance(g: &DirectedMultigraph) -> Option<usize> {
    let d = unit_levels(g)[g.t()];
    (d != UNREACHED).then_some(d)
}

/// One Dinic phase: builds the BFS level graph from `s` (no `(t, s)` links),
/// then saturates it with current-arc DFS. Every path found is flipped.
/// Returns the number of paths.
pub fn blocking_flow_round(g: &mut DirectedMultigraph) -> usize {
    let mut level = unit_levels(g);
    let (s, t) = (g.s(), g.t());
    if level[t] == UNREACHED || s == t {
        return 0;
    }
    let mut cursor = vec![0usize; g.n()];
    let mut path: Vec<ArcId> = Vec::new();
    let mut found = 0;
    let mut v = s;
    loop {
        if v == t {
            g.flip_unchecked(&path);
            g.record_augmentation();
            found += 1;
            path.clear();
            v = s;
            continue;
        }
        let inc = g.incident(v);
        let mut next = None;
        while cursor[v] < inc.len() {
            let a = g.arc(inc[cursor[v]]);
            if a.is_live() && !a.is_ts_link() && a.from() == v {
                let w = a.to();
                if level[w] != UNREACHED && level[w] == level[v] + 1 {
                    next = Some((inc[cursor[v]], w));
                    break;
                }
            }
            cursor[v] += 1;
        }
        match next {
            Some((id, w)) => {
                path.push(id);
                v = w;
            }
            None => {
                if v == s {
                    break;
                }
                // dead end: prune v and retreat
                level[v] = UNREACHED;
                let back = path.pop().expect("non-source vertex has an entry arc");
                v = g.arc(back).from();
                cursor[v] += 1;
            }
        }
    }
    found
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DinicRun {
    /// Flow added by this run.
    pub value: usize,
    pub rounds: usize,
    /// Residual `s`-`t` distance at the start of each productive round.
    pub distances: Vec<usize>,
}

/// Repeats [`blocking_flow_round`] until `t` is unreachable or `max_rounds`
/// rounds have run.
pub fn dinic_maxflow(g: &mut DirectedMultigraph, max_rounds: Option<usize>) -> DinicRun {
    let mut run = DinicRun::default();
    while max_rounds.is_none_or(|r| run.rounds < r) {
        let Some(d) = residual_distance(g) else { break };
        run.distances.push(d);
        run.value += blocking_flow_round(g);
        run.rounds += 1;
    }
    run
}

/// Max-flow value of the original arcs of `g`, computed on a fresh copy.
pub fn max_flow_value(g: &DirectedMultigraph) -> usize {
    let mut copy = g.pristine_copy();
    dinic_maxflow(&mut copy, None).value
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapArc {
    pub tail: VertexId,
    pub head: VertexId,
    pub capacity: f64,
    pub flow: f64,
}

/// Real-capacity network. Arcs are stored in residual pairs: arc `2k` is the
/// forward arc, `2k + 1` its zero-capacity reverse.
#[derive(Clone, Debug)]
pub struct CapacitatedNetwork {
    n: usize,
    arcs: Vec<CapArc>,
    adj: Vec<Vec<usize>>,
}

impl CapacitatedNetwork {
    pub fn new(n: usize) -> Self {
        CapacitatedNetwork {
            n,
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `tail -> head`; capacities below [`CAPACITY_EPS`] become zero.
    pub fn add_arc(&mut self, tail: VertexId, head: VertexId, capacity: f64) -> Result<usize> {
        if tail >= self.n || head >= self.n {
            return Err(FlowError::InvalidGraph(format!(
                "arc ({tail}, {head}) out of range"
            )));
        }
        if !(capacity >= 0.0) || !capacity.is_finite() {
            return Err(FlowError::InvalidParameter(format!(
                "capacity {capacity} must be finite and >= 0"
            )));
        }
        let capacity = if capacity < CAPACITY_EPS {
            0.0
        } else {
            capacity
        };
        let id = self.arcs.len();
        self.arcs.push(CapArc {
            tail,
            head,
            capacity,
            flow: 0.0,
        });
        self.arcs.push(CapArc {
            tail: head,
            head: tail,
            capacity: 0.0,
            flow: 0.0,
        });
        self.adj[tail].push(id);
        self.adj[head].push(id + 1);
        Ok(id / 2)
    }

    /// Forward arcs in insertion order.
    pub fn arcs(&self) -> impl Iterator<Item = &CapArc> + '_ {
        self.arcs.iter().step_by(2)
    }

    #[inline]
    fn residual(&self, e: usize) -> f64 {
        let a = &self.arcs[e];
        a.capacity - a.flow
    }

    fn levels(&self, src: VertexId, eps: f64) -> Vec<usize> {
        let mut level = vec![UNREACHED; self.n];
        let mut queue = VecDeque::new();
        level[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.arcs[e].head;
                if level[w] == UNREACHED && self.residual(e) > eps {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    }

    fn push(&mut self, e: usize, amount: f64) {
        self.arcs[e].flow += amount;
        self.arcs[e ^ 1].flow -= amount;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapacitatedFlow {
    pub value: f64,
    /// Vertices reachable from the source in the final residual network.
    pub source_side: Vec<bool>,
    pub cut_capacity: f64,
}

/// Exact max flow by blocking flows on real capacities, with the minimum
/// cut read off the final residual network. Fails if flow and cut disagree
/// beyond `1e-9` relative.
pub fn capacitated_maxflow(
    net: &mut CapacitatedNetwork,
    src: VertexId,
    snk: VertexId,
) -> Result<CapacitatedFlow> {
    if src >= net.n || snk >= net.n || src == snk {
        return Err(FlowError::InvalidParameter(format!(
            "bad terminals ({src}, {snk})"
        )));
    }
    let max_cap = net.arcs().map(|a| a.capacity).fold(1.0, f64::max);
    let eps = CAPACITY_EPS * max_cap;
    let mut value = 0.0;
    let mut stack: Vec<usize> = Vec::new();
    loop {
        let mut level = net.levels(src, eps);
        if level[snk] == UNREACHED {
            break;
        }
        let mut cursor = vec![0usize; net.n];
        let mut v = src;
        loop {
            if v == snk {
                let bottleneck = stack
                    .iter()
                    .map(|&e| net.residual(e))
                    .fold(f64::INFINITY, f64::min);
                for &e in &stack {
                    net.push(e, bottleneck);
                }
                value += bottleneck;
                // retreat to the tail of the first saturated arc
                let cut = stack
                    .iter()
                    .position(|&e| net.residual(e) <= eps)
                    .unwrap_or(0);
                stack.truncate(cut);
                v = stack.last().map_or(src, |&e| net.arcs[e].head);
                continue;
            }
            let mut advanced = false;
            while cursor[v] < net.adj[v].len() {
                let e = net.adj[v][cursor[v]];
                let w = net.arcs[e].head;
                if level[w] != UNREACHED && level[w] == level[v] + 1 && net.residual(e) > eps {
                    stack.push(e);
                    v = w;
                    advanced = true;
                    break;
                }
                cursor[v] += 1;
            }
            if advanced {
                continue;
            }
            if v == src {
                break;
            }
            level[v] = UNREACHED;
            let e = stack.pop().expect("non-source vertex has an entry arc");
            v = net.arcs[e].tail;
            cursor[v] += 1;
        }
    }

    let level = net.levels(src, eps);
    let source_side: Vec<bool> = level.iter().map(|&l| l != UNREACHED).collect();
    let cut_capacity: f64 = net
        .arcs()
        .filter(|a| source_side[a.tail] && !source_side[a.head])
        .map(|a| a.capacity)
        .sum();
    if (value - cut_capacity).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(FlowError::CutMismatch {
            flow: value,
            cut: cut_capacity,
        });
    }
    Ok(CapacitatedFlow {
        value,
        source_side,
        cut_capacity,
    })
}
