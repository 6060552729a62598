//! Directed multigraph whose arcs can be flipped in place.
//!
//! The residual graph of a unit-capacity flow is the input graph with every
//! arc on every flow path reversed, so instead of keeping a separate residual
//! structure each [`Arc`] carries a `flipped` bit and reports its *effective*
//! orientation. Arc storage is append-only; deleted arcs are tombstoned so
//! that [`ArcId`]s stay valid for the potential and sparsifier bookkeeping.

mod paths;
mod scc;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

pub use paths::FlowPath;
pub use scc::RestrictedGraph;

pub type VertexId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArcId(pub usize);

impl ArcId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcTag {
    Original,
    /// One of the parallel `(t, s)` arcs added by preprocessing. Never part of
    /// an augmenting path, never flipped.
    TsLink,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub tail: VertexId,
    pub head: VertexId,
    pub tag: ArcTag,
    pub flipped: bool,
    live: bool,
}

impl Arc {
    /// Tail in the current (residual) orientation.
    #[inline]
    pub fn from(&self) -> VertexId {
        if self.flipped {
            self.head
        } else {
            self.tail
        }
    }

    /// Head in the current (residual) orientation.
    #[inline]
    pub fn to(&self) -> VertexId {
        if self.flipped {
            self.tail
        } else {
            self.head
        }
    }

    #[inline]
    pub fn is_live(&self) -> bool {
        self.live
    }

    #[inline]
    pub fn is_ts_link(&self) -> bool {
        self.tag == ArcTag::TsLink
    }

    #[inline]
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// One side `S` of a bipartition `(S, V \ S)`; always nonempty and proper.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CutSide {
    mask: Vec<bool>,
    size: usize,
}

impl CutSide {
    pub fn from_mask(mask: Vec<bool>) -> Result<Self> {
        let size = mask.iter().filter(|&&b| b).count();
        if size == 0 || size == mask.len() {
            return Err(FlowError::InvalidParameter(format!(
                "cut side must be a nonempty proper subset (size {size} of {})",
                mask.len()
            )));
        }
        Ok(CutSide { mask, size })
    }

    pub fn from_members(n: usize, members: impl IntoIterator<Item = VertexId>) -> Result<Self> {
        let mut mask = vec![false; n];
        for v in members {
            if v >= n {
                return Err(FlowError::InvalidParameter(format!(
                    "vertex {v} out of range {n}"
                )));
            }
            mask[v] = true;
        }
        Self::from_mask(mask)
    }

    /// Builds the side from the low `n` bits of `bits`.
    pub fn from_bits(n: usize, bits: u64) -> Result<Self> {
        Self::from_mask((0..n).map(|v| bits >> v & 1 == 1).collect())
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.mask[v]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn members(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(v, _)| v)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn vertex_count(&self) -> usize {
        self.mask.len()
    }

    pub fn complement(&self) -> CutSide {
        CutSide {
            mask: self.mask.iter().map(|b| !b).collect(),
            size: self.mask.len() - self.size,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectedMultigraph {
    n: usize,
    arcs: Vec<Arc>,
    /// Arcs touching each vertex, in insertion order. A self-loop is listed once.
    incident: Vec<Vec<ArcId>>,
    s: VertexId,
    t: VertexId,
    live: usize,
    flow_value: usize,
}

impl DirectedMultigraph {
    pub fn new(n: usize, s: VertexId, t: VertexId) -> Result<Self> {
        if s >= n || t >= n {
            return Err(FlowError::InvalidGraph(format!(
                "terminals ({s}, {t}) out of range for {n} vertices"
            )));
        }
        Ok(DirectedMultigraph {
            n,
            arcs: Vec::new(),
            incident: vec![Vec::new(); n],
            s,
            t,
            live: 0,
            flow_value: 0,
        })
    }

    /// Builds a graph of `Original` arcs from `(tail, head)` pairs.
    pub fn from_arcs(
        n: usize,
        s: VertexId,
        t: VertexId,
        arcs: &[(VertexId, VertexId)],
    ) -> Result<Self> {
        let mut g = Self::new(n, s, t)?;
        for &(u, v) in arcs {
            g.add_arc(u, v)?;
        }
        Ok(g)
    }

    pub fn add_arc(&mut self, tail: VertexId, head: VertexId) -> Result<ArcId> {
        self.add_tagged_arc(tail, head, ArcTag::Original)
    }

    pub fn add_tagged_arc(&mut self, tail: VertexId, head: VertexId, tag: ArcTag) -> Result<ArcId> {
        if tail >= self.n || head >= self.n {
            return Err(FlowError::InvalidGraph(format!(
                "arc ({tail}, {head}) out of range for {} vertices",
                self.n
            )));
        }
        let id = ArcId(self.arcs.len());
        self.arcs.push(Arc {
            tail,
            head,
            tag,
            flipped: false,
            live: true,
        });
        self.incident[tail].push(id);
        if head != tail {
            self.incident[head].push(id);
        }
        self.live += 1;
        Ok(id)
    }

    /// Tombstones an arc. Its id is never reused.
    pub fn delete_arc(&mut self, id: ArcId) -> Result<()> {
        let arc = self.arcs.get_mut(id.0).ok_or(FlowError::UnknownArc(id))?;
        if !arc.live {
            return Err(FlowError::UnknownArc(id));
        }
        arc.live = false;
        self.live -= 1;
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn s(&self) -> VertexId {
        self.s
    }

    #[inline]
    pub fn t(&self) -> VertexId {
        self.t
    }

    #[inline]
    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id.0]
    }

    /// Number of live arcs.
    pub fn arc_count(&self) -> usize {
        self.live
    }

    /// Upper bound on arc ids ever issued; size for arc-indexed tables.
    pub fn arc_capacity(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (ArcId, &Arc)> + '_ {
        self.arcs
            .iter()
            .enumerate()
            .filter(|(_, a)| a.live)
            .map(|(i, a)| (ArcId(i), a))
    }

    pub fn original_arc_count(&self) -> usize {
        self.arcs()
            .filter(|(_, a)| a.tag == ArcTag::Original)
            .count()
    }

    pub fn ts_link_count(&self) -> usize {
        self.arcs().filter(|(_, a)| a.is_ts_link()).count()
    }

    #[inline]
    pub fn incident(&self, v: VertexId) -> &[ArcId] {
        &self.incident[v]
    }

    /// Number of augmenting paths flipped so far.
    pub fn flow_value(&self) -> usize {
        self.flow_value
    }

    /// Adds one `(t, s)` [`ArcTag::TsLink`] arc per live original arc. The
    /// maximum `s`-`t` flow is unchanged since no simple `s`-`t` path can use
    /// an arc into `s`.
    pub fn add_ts_links(&mut self) -> Result<usize> {
        if self.s == self.t {
            return Err(FlowError::InvalidGraph("source equals sink".into()));
        }
        let m = self.original_arc_count();
        if m == 0 {
            return Err(FlowError::InvalidGraph("graph has no arcs".into()));
        }
        for _ in 0..m {
            self.add_tagged_arc(self.t, self.s, ArcTag::TsLink)?;
        }
        Ok(m)
    }

    /// Flips every arc of an `s`-`t` path in the residual graph and bumps the
    /// flow value.
    pub fn flip_path(&mut self, path: &[ArcId]) -> Result<()> {
        self.check_path(path, self.s, self.t, false)?;
        self.flip_unchecked(path);
        self.flow_value += 1;
        Ok(())
    }

    /// Undoes [`flip_path`](Self::flip_path): `path` runs from `t` to `s` over
    /// previously flipped arcs.
    pub fn cancel_path(&mut self, path: &[ArcId]) -> Result<()> {
        if self.flow_value == 0 {
            return Err(FlowError::InvalidPath("no flow to cancel".into()));
        }
        self.check_path(path, self.t, self.s, true)?;
        self.flip_unchecked(path);
        self.flow_value -= 1;
        Ok(())
    }

    pub(crate) fn flip_unchecked(&mut self, path: &[ArcId]) {
        for &a in path {
            let arc = &mut self.arcs[a.0];
            debug_assert!(!arc.is_ts_link());
            arc.flipped = !arc.flipped;
        }
    }

    pub(crate) fn record_augmentation(&mut self) {
        self.flow_value += 1;
    }

    /// Copies the flip state of `other`'s arcs back onto the arcs they were
    /// restricted from.
    pub(crate) fn absorb_restricted(&mut self, restricted: &RestrictedGraph) {
        for (new_id, &old_id) in restricted.arc_of.iter().enumerate() {
            self.arcs[old_id.0].flipped = restricted.graph.arcs[new_id].flipped;
        }
        self.flow_value = restricted.graph.flow_value;
    }

    fn check_path(
        &self,
        path: &[ArcId],
        from: VertexId,
        to: VertexId,
        need_flipped: bool,
    ) -> Result<()> {
        let first = path
            .first()
            .ok_or_else(|| FlowError::InvalidPath("empty path".into()))?;
        if self.arcs.get(first.0).map(|a| a.from()) != Some(from) {
            return Err(FlowError::InvalidPath(format!(
                "path does not start at {from}"
            )));
        }
        let mut seen = HashSet::with_capacity(path.len() + 1);
        seen.insert(from);
        let mut at = from;
        for &id in path {
            let arc = self.arcs.get(id.0).ok_or(FlowError::UnknownArc(id))?;
            if !arc.live {
                return Err(FlowError::UnknownArc(id));
            }
            if arc.is_ts_link() {
                return Err(FlowError::InvalidPath(format!(
                    "arc {id:?} is a (t,s) link"
                )));
            }
            if need_flipped && !arc.flipped {
                return Err(FlowError::InvalidPath(format!(
                    "arc {id:?} carries no flow"
                )));
            }
            if arc.from() != at {
                return Err(FlowError::InvalidPath(format!(
                    "arc {id:?} does not leave vertex {at}"
                )));
            }
            at = arc.to();
            if !seen.insert(at) {
                return Err(FlowError::InvalidPath(format!("vertex {at} repeated")));
            }
        }
        if at != to {
            return Err(FlowError::InvalidPath(format!(
                "path ends at {at}, expected {to}"
            )));
        }
        Ok(())
    }

    /// Arcs whose effective tail is in `S` and head outside.
    pub fn out_boundary(&self, cut: &CutSide) -> Vec<ArcId> {
        self.arcs()
            .filter(|(_, a)| cut.contains(a.from()) && !cut.contains(a.to()))
            .map(|(id, _)| id)
            .collect()
    }

    /// Arcs whose effective head is in `S` and tail outside.
    pub fn in_boundary(&self, cut: &CutSide) -> Vec<ArcId> {
        self.arcs()
            .filter(|(_, a)| !cut.contains(a.from()) && cut.contains(a.to()))
            .map(|(id, _)| id)
            .collect()
    }

    /// `(tail, head)` pairs of live arcs in original orientation, with tags.
    pub fn arc_list(&self) -> Vec<(VertexId, VertexId, ArcTag)> {
        self.arcs().map(|(_, a)| (a.tail, a.head, a.tag)).collect()
    }

    /// Copy with only live original arcs, all unflipped, same terminals.
    pub fn pristine_copy(&self) -> DirectedMultigraph {
        let mut g =
            DirectedMultigraph::new(self.n, self.s, self.t).expect("terminals already validated");
        for (_, a) in self.arcs().filter(|(_, a)| a.tag == ArcTag::Original) {
            g.add_arc(a.tail, a.head)
                .expect("endpoints already validated");
        }
        g
    }
}
