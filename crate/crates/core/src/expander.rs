//! Static expander decomposition of undirected multigraphs with self-loops.
//!
//! Components are split recursively along low-conductance cuts until each
//! piece is certified. Pieces of at most [`EXACT_LIMIT`] vertices are handled
//! by exhaustive enumeration; larger ones use a spectral sweep to find cuts
//! and the Cheeger bound `lambda_2 / 2` of the normalized Laplacian to
//! certify. A self-loop adds 2 to the degree of its vertex and never crosses
//! a cut.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FlowError, Result};
use crate::graph::VertexId;
use crate::par::{self, ExecMode};

/// Largest piece whose conductance is computed exactly.
pub const EXACT_LIMIT: usize = 16;
/// Largest piece whose spectrum is computed with a dense eigensolver.
pub const DENSE_LIMIT: usize = 400;
pub const POWER_ITERATIONS: usize = 200;
pub const POWER_TOL: f64 = 1e-8;
/// Safety margin subtracted from the dense `lambda_2` before certifying.
const SPECTRAL_MARGIN: f64 = 1e-9;

/// Undirected multigraph. Entries of `edges` keep their index as edge id;
/// an entry with equal endpoints is a loop. Padding loops added with
/// [`UGraph::add_self_loops`] are only counted per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UGraph {
    n: usize,
    edges: Vec<(VertexId, VertexId)>,
    loops: Vec<u64>,
}

impl UGraph {
    pub fn new(n: usize, edges: Vec<(VertexId, VertexId)>) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(FlowError::InvalidGraph(format!(
                "edge ({u}, {v}) out of range for {n} vertices"
            )));
        }
        Ok(UGraph {
            n,
            edges,
            loops: vec![0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn padding_loops(&self, v: VertexId) -> u64 {
        self.loops[v]
    }

    /// A copy with `per_vertex` more padding loops on every vertex.
    pub fn add_self_loops(&self, per_vertex: u64) -> UGraph {
        let mut g = self.clone();
        for l in &mut g.loops {
            *l += per_vertex;
        }
        g
    }

    pub fn degrees(&self) -> Vec<u64> {
        let mut deg: Vec<u64> = self.loops.iter().map(|l| 2 * l).collect();
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn volume(&self, s: &[bool]) -> u64 {
        self.degrees()
            .iter()
            .zip(s)
            .filter(|(_, &b)| b)
            .map(|(d, _)| d)
            .sum()
    }

    /// Number of non-loop edges with exactly one endpoint in `s`.
    pub fn cut_size(&self, s: &[bool]) -> u64 {
        self.edges.iter().filter(|&&(u, v)| s[u] != s[v]).count() as u64
    }

    /// `|boundary(S)| / min(vol(S), vol(V \ S))`.
    pub fn conductance(&self, s: &[bool]) -> Result<f64> {
        let vol_s = self.volume(s);
        let vol_rest = self.degrees().iter().sum::<u64>() - vol_s;
        if vol_s == 0 || vol_rest == 0 {
            return Err(FlowError::InvalidParameter(
                "conductance of a cut with an empty-volume side".into(),
            ));
        }
        Ok(self.cut_size(s) as f64 / vol_s.min(vol_rest) as f64)
    }

    /// Connected components over non-loop edges.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let all: Vec<VertexId> = (0..self.n).collect();
        Piece::induced(self, &all)
            .components()
            .into_iter()
            .map(|c| c.into_iter().map(|i| all[i]).collect())
            .collect()
    }
}

/// Outcome of [`certify_expander`].
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    /// Conductance is at least `bound >= phi_target`.
    Certified { bound: f64 },
    /// A cut of conductance below the target.
    Cut { side: Vec<bool>, conductance: f64 },
    /// No cut below the target was found and the certified lower bound
    /// `bound` (possibly tiny) falls short of it.
    Inconclusive { bound: f64 },
}

/// Certifies that a connected graph is a `phi_target`-expander or finds a
/// cut that shows it is not.
pub fn certify_expander(g: &UGraph, phi_target: f64) -> Certificate {
    let all: Vec<VertexId> = (0..g.n).collect();
    Piece::induced(g, &all).certify(phi_target)
}

/// Exact minimum conductance and a minimising side, for `n <= EXACT_LIMIT`.
pub fn exact_min_conductance(g: &UGraph) -> Result<(f64, Vec<bool>)> {
    if g.n > EXACT_LIMIT {
        return Err(FlowError::OversizeBruteForce {
            n: g.n,
            max: EXACT_LIMIT,
        });
    }
    let all: Vec<VertexId> = (0..g.n).collect();
    Piece::induced(g, &all).exact().ok_or_else(|| {
        FlowError::InvalidGraph("fewer than two vertices with positive volume".into())
    })
}

/// The induced subgraph on a vertex subset, with parallel edges merged.
struct Piece {
    adj: Vec<Vec<(usize, u64)>>,
    deg: Vec<u64>,
}

impl Piece {
    fn induced(g: &UGraph, vertices: &[VertexId]) -> Piece {
        let mut local = vec![usize::MAX; g.n];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let k = vertices.len();
        let mut deg: Vec<u64> = vertices.iter().map(|&v| 2 * g.loops[v]).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for &(u, v) in &g.edges {
            let (a, b) = (local[u], local[v]);
            if a == usize::MAX || b == usize::MAX {
                continue;
            }
            deg[a] += 1;
            deg[b] += 1;
            if a != b {
                pairs.push((a, b));
                pairs.push((b, a));
            }
        }
        pairs.sort_unstable();
        let mut adj = vec![Vec::new(); k];
        for (a, b) in pairs {
            match adj[a].last_mut() {
                Some((last, mult)) if *last == b => *mult += 1,
                _ => adj[a].push((b, 1)),
            }
        }
        Piece { adj, deg }
    }

    fn len(&self) -> usize {
        self.deg.len()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for root in 0..self.len() {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut comp = vec![root];
            let mut i = 0;
            while i < comp.len() {
                for &(w, _) in &self.adj[comp[i]] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    fn total_volume(&self) -> u64 {
        self.deg.iter().sum()
    }

    /// Gray-code enumeration of all cuts with the last vertex outside.
    fn exact(&self) -> Option<(f64, Vec<bool>)> {
        let k = self.len();
        if k < 2 {
            return None;
        }
        let total = self.total_volume();
        let mut inside = vec![false; k];
        let (mut cut, mut vol) = (0u64, 0u64);
        let mut best: Option<(f64, u64)> = None;
        let mut gray = 0u64;
        for step in 1u64..(1u64 << (k - 1)) {
            let v = step.trailing_zeros() as usize;
            gray ^= 1 << v;
            let entering = !inside[v];
            inside[v] = entering;
            for &(w, mult) in &self.adj[v] {
                if inside[w] == entering {
                    cut -= mult;
                } else {
                    cut += mult;
                }
            }
            if entering {
                vol += self.deg[v];
            } else {
                vol -= self.deg[v];
            }
            let denom = vol.min(total - vol);
            if denom == 0 {
                continue;
            }
            let phi = cut as f64 / denom as f64;
            if best.is_none_or(|(b, _)| phi < b) {
                best = Some((phi, gray));
            }
        }
        best.map(|(phi, bits)| (phi, (0..k).map(|v| bits >> v & 1 == 1).collect()))
    }

    fn certify(&self, phi: f64) -> Certificate {
        let k = self.len();
        if k < 2 {
            return Certificate::Certified {
                bound: f64::INFINITY,
            };
        }
        if k <= EXACT_LIMIT {
            return match self.exact() {
                None => Certificate::Certified {
                    bound: f64::INFINITY,
                },
                Some((c, side)) if c < phi => Certificate::Cut {
                    side,
                    conductance: c,
                },
                Some((c, _)) => Certificate::Certified { bound: c },
            };
        }
        let mut best_cut = self.sweep(&self.power_vector());
        let mut bound = 2.0 / self.total_volume() as f64;
        if k <= DENSE_LIMIT {
            let (lambda2, vector) = self.dense_spectrum();
            bound = bound.max(lambda2 / 2.0 - SPECTRAL_MARGIN);
            let dense_cut = self.sweep(&vector);
            if dense_cut.0 < best_cut.0 {
                best_cut = dense_cut;
            }
        }
        if best_cut.0 < phi {
            Certificate::Cut {
                side: best_cut.1,
                conductance: best_cut.0,
            }
        } else if bound >= phi {
            Certificate::Certified { bound }
        } else {
            Certificate::Inconclusive { bound }
        }
    }

    /// `D^{-1/2} A D^{-1/2}` applied to `x`, loops on the diagonal.
    fn normalized_adjacency(&self, x: &[f64], inv_sqrt: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|v| {
                let off: u64 = self.adj[v].iter().map(|e| e.1).sum();
                let loop_weight = (self.deg[v] - off) as f64;
                let mut acc = loop_weight * inv_sqrt[v] * x[v];
                for &(w, mult) in &self.adj[v] {
                    acc += mult as f64 * inv_sqrt[w] * x[w];
                }
                acc * inv_sqrt[v]
            })
            .collect()
    }

    /// Second eigenvector of the normalized Laplacian by power iteration on
    /// the lazy walk matrix, deflating the stationary direction. Returned in
    /// the `D^{-1/2}` embedding used by the sweep.
    fn power_vector(&self) -> Vec<f64> {
        let k = self.len();
        let inv_sqrt: Vec<f64> = self.deg.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        let total = self.total_volume() as f64;
        let top: Vec<f64> = self
            .deg
            .iter()
            .map(|&d| (d as f64 / total).sqrt())
            .collect();
        let deflate = |x: &mut Vec<f64>| {
            let dot: f64 = x.iter().zip(&top).map(|(a, b)| a * b).sum();
            for (xi, ti) in x.iter_mut().zip(&top) {
                *xi -= dot * ti;
            }
            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.iter_mut().for_each(|a| *a /= norm);
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ k as u64);
        let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        deflate(&mut x);
        for _ in 0..POWER_ITERATIONS {
            let ax = self.normalized_adjacency(&x, &inv_sqrt);
            let mut next: Vec<f64> = x.iter().zip(&ax).map(|(a, b)| 0.5 * (a + b)).collect();
            deflate(&mut next);
            let change = next
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = next;
            if change < POWER_TOL {
                break;
            }
        }
        x.iter().zip(&inv_sqrt).map(|(a, s)| a * s).collect()
    }

    /// `lambda_2` of the normalized Laplacian and its eigenvector in the
    /// sweep embedding.
    fn dense_spectrum(&self) -> (f64, Vec<f64>) {
        let k = self.len();
        let inv_sqrt: Vec<f64> = self.deg.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
        let mut lap = DMatrix::<f64>::zeros(k, k);
        for v in 0..k {
            let off: u64 = self.adj[v].iter().map(|e| e.1).sum();
            lap[(v, v)] = off as f64 / self.deg[v] as f64;
            for &(w, mult) in &self.adj[v] {
                lap[(v, w)] = -(mult as f64) * inv_sqrt[v] * inv_sqrt[w];
            }
        }
        let eig = SymmetricEigen::new(lap);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let i = order[1];
        let vector = (0..k)
            .map(|v| eig.eigenvectors[(v, i)] * inv_sqrt[v])
            .collect();
        (eig.eigenvalues[i].max(0.0), vector)
    }

    /// Best of the `k - 1` prefix cuts in the order given by `x`.
    fn sweep(&self, x: &[f64]) -> (f64, Vec<bool>) {
        let k = self.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let total = self.total_volume();
        let mut inside = vec![false; k];
        let (mut cut, mut vol) = (0u64, 0u64);
        let mut best = (f64::INFINITY, 0usize);
        for (i, &v) in order.iter().enumerate().take(k - 1) {
            inside[v] = true;
            for &(w, mult) in &self.adj[v] {
                if inside[w] {
                    cut -= mult;
                } else {
                    cut += mult;
                }
            }
            vol += self.deg[v];
            let denom = vol.min(total - vol);
            if denom > 0 {
                let phi = cut as f64 / denom as f64;
                if phi < best.0 {
                    best = (phi, i + 1);
                }
            }
        }
        let mut side = vec![false; k];
        for &v in &order[..best.1] {
            side[v] = true;
        }
        (best.0, side)
    }
}

/// A decomposition into clusters with the certified expansion of each.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub clusters: Vec<Vec<VertexId>>,
    pub cluster_of: Vec<usize>,
    /// Ids of edges whose endpoints lie in different clusters.
    pub boundary: Vec<usize>,
    /// Certified conductance lower bound per cluster (infinite for
    /// singletons).
    pub certified: Vec<f64>,
    pub phi: f64,
    pub slack: f64,
}

impl Partition {
    /// Boundary recomputed from scratch.
    pub fn recompute_boundary(&self, g: &UGraph) -> Vec<usize> {
        g.edges
            .iter()
            .enumerate()
            .filter(|(_, &(u, v))| self.cluster_of[u] != self.cluster_of[v])
            .map(|(i, _)| i)
            .collect()
    }

    /// The subgraph induced by cluster `c`, with its padding loops.
    pub fn cluster_graph(&self, g: &UGraph, c: usize) -> UGraph {
        let members = &self.clusters[c];
        let mut local = vec![usize::MAX; g.n];
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let edges = g
            .edges
            .iter()
            .filter(|&&(u, v)| self.cluster_of[u] == c && self.cluster_of[v] == c)
            .map(|&(u, v)| (local[u], local[v]))
            .collect();
        UGraph {
            n: members.len(),
            edges,
            loops: members.iter().map(|&v| g.loops[v]).collect(),
        }
    }
}

/// Splits one vertex set until every piece is certified or inconclusive.
fn decompose_set(g: &UGraph, root: Vec<VertexId>, phi: f64) -> Vec<(Vec<VertexId>, f64)> {
    let mut out = Vec::new();
    let mut work = vec![root];
    while let Some(set) = work.pop() {
        let piece = Piece::induced(g, &set);
        let comps = piece.components();
        if comps.len() > 1 {
            work.extend(
                comps
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| set[i]).collect()),
            );
            continue;
        }
        match piece.certify(phi) {
            Certificate::Certified { bound } | Certificate::Inconclusive { bound } => {
                out.push((set, bound))
            }
            Certificate::Cut { side, .. } => {
                let (a, b): (Vec<_>, Vec<_>) =
                    set.iter().zip(&side).partition(|(_, &inside)| inside);
                work.push(a.into_iter().map(|(&v, _)| v).collect());
                work.push(b.into_iter().map(|(&v, _)| v).collect());
            }
        }
    }
    out
}

/// Expander decomposition with target conductance `phi`; connected
/// components are processed independently under `exec`.
pub fn decompose(g: &UGraph, phi: f64, exec: ExecMode) -> Result<Partition> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(FlowError::InvalidParameter(format!(
            "phi = {phi} must lie in (0, 1)"
        )));
    }
    let pieces = par::map_owned(exec, g.components(), |c| decompose_set(g, c, phi));
    let mut found: Vec<(Vec<VertexId>, f64)> = pieces.into_iter().flatten().collect();
    for (set, _) in &mut found {
        set.sort_unstable();
    }
    found.sort_by(|a, b| a.0.cmp(&b.0));

    let mut cluster_of = vec![0; g.n];
    let mut clusters = Vec::with_capacity(found.len());
    let mut certified = Vec::with_capacity(found.len());
    let mut slack: f64 = 1.0;
    for (i, (set, bound)) in found.into_iter().enumerate() {
        for &v in &set {
            cluster_of[v] = i;
        }
        if bound < phi {
            slack = slack.max(phi / bound);
        }
        clusters.push(set);
        certified.push(bound);
    }
    let mut p = Partition {
        clusters,
        cluster_of,
        boundary: Vec::new(),
        certified,
        phi,
        slack,
    };
    p.boundary = p.recompute_boundary(g);
    Ok(p)
}
