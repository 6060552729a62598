use super::{ArcId, DirectedMultigraph, VertexId};

const UNVISITED: usize = usize::MAX;

/// The strongly connected component containing `s` and `t`, re-indexed.
#[derive(Clone, Debug)]
pub struct RestrictedGraph {
    pub graph: DirectedMultigraph,
    /// New vertex id -> vertex id in the source graph.
    pub vertex_of: Vec<VertexId>,
    /// New arc id -> arc id in the source graph.
    pub arc_of: Vec<ArcId>,
}

impl DirectedMultigraph {
    /// Strongly connected components over live arcs in effective orientation.
    /// Returns the component index per vertex and the component count.
    ///
    /// Iterative Tarjan; components are numbered in reverse topological order.
    pub fn strongly_connected_components(&self) -> (Vec<usize>, usize) {
        let n = self.n;
        let mut index = vec![UNVISITED; n];
        let mut low = vec![0usize; n];
        let mut on_stack = vec![false; n];
        let mut comp = vec![UNVISITED; n];
        let mut stack: Vec<VertexId> = Vec::new();
        // (vertex, next position in its incidence list)
        let mut call: Vec<(VertexId, usize)> = Vec::new();
        let mut next_index = 0;
        let mut count = 0;

        for root in 0..n {
            if index[root] != UNVISITED {
                continue;
            }
            call.push((root, 0));
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;

            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                let inc = &self.incident[v];
                let mut descended = false;
                while *pos < inc.len() {
                    let arc = &self.arcs[inc[*pos].0];
                    *pos += 1;
                    if !arc.live || arc.from() != v {
                        continue;
                    }
                    let w = arc.to();
                    if index[w] == UNVISITED {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                        descended = true;
                        break;
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                }
                if descended {
                    continue;
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
        (comp, count)
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.n <= 1 || self.strongly_connected_components().1 == 1
    }

    /// Restricts to the strongly connected component holding both terminals.
    /// `None` means `s` and `t` are in different components, which (once the
    /// `(t, s)` links exist) certifies that the maximum flow is zero.
    pub fn scc_restrict(&self) -> Option<RestrictedGraph> {
        let (comp, _) = self.strongly_connected_components();
        let c = comp[self.s];
        if comp[self.t] != c {
            return None;
        }
        let mut new_id = vec![UNVISITED; self.n];
        let mut vertex_of = Vec::new();
        for v in 0..self.n {
            if comp[v] == c {
                new_id[v] = vertex_of.len();
                vertex_of.push(v);
            }
        }
        let mut graph = DirectedMultigraph::new(vertex_of.len(), new_id[self.s], new_id[self.t])
            .expect("terminals lie in the component");
        let mut arc_of = Vec::new();
        for (id, arc) in self.arcs() {
            if comp[arc.tail] == c && comp[arc.head] == c {
                let nid = graph
                    .add_tagged_arc(new_id[arc.tail], new_id[arc.head], arc.tag)
                    .expect("endpoints remapped into range");
                graph.arcs[nid.0].flipped = arc.flipped;
                arc_of.push(id);
            }
        }
        graph.flow_value = self.flow_value;
        Some(RestrictedGraph {
            graph,
            vertex_of,
            arc_of,
        })
    }
}
