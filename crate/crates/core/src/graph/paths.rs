use std::collections::VecDeque;

use super::{ArcId, ArcTag, DirectedMultigraph, VertexId};
use crate::error::{FlowError, Result};

const NONE: usize = usize::MAX;

/// One unit of flow in original orientation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPath {
    pub vertices: Vec<VertexId>,
    pub arcs: Vec<ArcId>,
}

impl DirectedMultigraph {
    /// Breadth-first `s`-`t` search in the residual graph. Only arcs whose
    /// entry in `restrict_to` is set are used (when given); `(t, s)` links are
    /// skipped when `forbid_ts` holds.
    pub fn find_path(&self, forbid_ts: bool, restrict_to: Option<&[bool]>) -> Option<Vec<ArcId>> {
        let usable = |id: ArcId| -> bool {
            let arc = &self.arcs[id.0];
            arc.live
                && !(forbid_ts && arc.is_ts_link())
                && restrict_to.is_none_or(|mask| mask.get(id.0).copied().unwrap_or(false))
        };
        let mut parent = vec![NONE; self.n];
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        seen[self.s] = true;
        queue.push_back(self.s);
        while let Some(v) = queue.pop_front() {
            if v == self.t {
                break;
            }
            for &id in &self.incident[v] {
                let arc = &self.arcs[id.0];
                if arc.from() != v || !usable(id) {
                    continue;
                }
                let w = arc.to();
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = id.0;
                    queue.push_back(w);
                }
            }
        }
        if !seen[self.t] || self.s == self.t {
            return None;
        }
        let mut path = Vec::new();
        let mut v = self.t;
        while v != self.s {
            let id = ArcId(parent[v]);
            path.push(id);
            v = self.arcs[id.0].from();
        }
        path.reverse();
        Some(path)
    }

    /// Vertices reachable from `from` in the residual graph.
    pub fn reachable_from(&self, from: VertexId, forbid_ts: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &id in &self.incident[v] {
                let arc = &self.arcs[id.0];
                if !arc.live || arc.from() != v || (forbid_ts && arc.is_ts_link()) {
                    continue;
                }
                let w = arc.to();
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Decomposes the flow encoded by flipped original arcs into arc-disjoint
    /// `s`-`t` paths. Flow cycles are cancelled along the way.
    pub fn extract_flow_paths(&self) -> Result<Vec<FlowPath>> {
        let n = self.n;
        let mut out: Vec<Vec<ArcId>> = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for (id, arc) in self.arcs() {
            if arc.flipped && arc.tag == ArcTag::Original {
                out[arc.tail].push(id);
                indeg[arc.head] += 1;
            }
        }
        for v in 0..n {
            if v != self.s && v != self.t && out[v].len() != indeg[v] {
                return Err(FlowError::FlowInconsistency {
                    vertex: v,
                    inflow: indeg[v],
                    outflow: out[v].len(),
                });
            }
        }
        let net = out[self.s].len() as isize - indeg[self.s] as isize;
        if net < 0 {
            return Err(FlowError::FlowInconsistency {
                vertex: self.s,
                inflow: indeg[self.s],
                outflow: out[self.s].len(),
            });
        }

        // Greedy walk from s consuming flow arcs; a revisited vertex closes a
        // cycle, which is popped off the walk and discarded.
        let mut next = vec![0usize; n];
        let mut pos = vec![NONE; n];
        let mut paths = Vec::with_capacity(net as usize);
        while paths.len() < net as usize {
            let mut walk_v = vec![self.s];
            let mut walk_a: Vec<ArcId> = Vec::new();
            pos[self.s] = 0;
            let mut v = self.s;
            while v != self.t {
                if next[v] == out[v].len() {
                    for &u in &walk_v {
                        pos[u] = NONE;
                    }
                    return Err(FlowError::InvalidGraph(format!(
                        "flow walk stuck at vertex {v}"
                    )));
                }
                let a = out[v][next[v]];
                next[v] += 1;
                let w = self.arcs[a.0].head;
                if pos[w] != NONE {
                    let keep = pos[w] + 1;
                    for &u in &walk_v[keep..] {
                        pos[u] = NONE;
                    }
                    walk_v.truncate(keep);
                    walk_a.truncate(keep - 1);
                    v = w;
                    continue;
                }
                pos[w] = walk_v.len();
                walk_v.push(w);
                walk_a.push(a);
                v = w;
            }
            for &u in &walk_v {
                pos[u] = NONE;
            }
            paths.push(FlowPath {
                vertices: walk_v,
                arcs: walk_a,
            });
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_restriction_finds_nothing() {
        let g = DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1)]).unwrap();
        assert_eq!(g.find_path(true, Some(&[])), None);
        assert_eq!(g.find_path(true, Some(&[false])), None);
        assert_eq!(g.find_path(true, None), Some(vec![ArcId(0)]));
    }

    #[test]
    fn ts_links_can_be_excluded() {
        let mut g = DirectedMultigraph::from_arcs(2, 0, 1, &[(1, 0)]).unwrap();
        g.add_tagged_arc(0, 1, ArcTag::TsLink).unwrap();
        assert_eq!(g.find_path(true, None), None);
        assert_eq!(g.find_path(false, None), Some(vec![ArcId(1)]));
    }

    #[test]
    fn no_flow_no_paths() {
        let g = DirectedMultigraph::from_arcs(3, 0, 2, &[(0, 1), (1, 2)]).unwrap();
        assert!(g.extract_flow_paths().unwrap().is_empty());
    }

    #[test]
    fn two_paths_recovered() {
        let mut g =
            DirectedMultigraph::from_arcs(4, 0, 3, &[(0, 1), (1, 3), (0, 2), (2, 3)]).unwrap();
        g.flip_path(&[ArcId(0), ArcId(1)]).unwrap();
        g.flip_path(&[ArcId(2), ArcId(3)]).unwrap();
        let mut got: Vec<_> = g
            .extract_flow_paths()
            .unwrap()
            .into_iter()
            .map(|p| p.vertices)
            .collect();
        got.sort();
        assert_eq!(got, vec![vec![0, 1, 3], vec![0, 2, 3]]);
    }

    #[test]
    fn cycles_are_cancelled() {
        // s=0 -> 1 -> 2 -> 1 ... the 1->2->1 cycle carries flow too
        let mut g =
            DirectedMultigraph::from_arcs(4, 0, 3, &[(0, 1), (1, 2), (2, 1), (1, 3)]).unwrap();
        for a in 0..4 {
            g.arcs[a].flipped = true;
        }
        let paths = g.extract_flow_paths().unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices.first(), Some(&0));
        assert_eq!(paths[0].vertices.last(), Some(&3));
    }

    #[test]
    fn conservation_violation_is_reported() {
        let mut g = DirectedMultigraph::from_arcs(3, 0, 2, &[(0, 1), (1, 2)]).unwrap();
        g.arcs[0].flipped = true;
        assert!(matches!(
            g.extract_flow_paths(),
            Err(FlowError::FlowInconsistency { vertex: 1, .. })
        ));
    }
}
