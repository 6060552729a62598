//! Seeded random instances. Every model yields a simple digraph: no loops,
//! no parallel arcs.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::graph::{DirectedMultigraph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `m` distinct ordered pairs, uniformly at random; `s = 0`, `t = n - 1`.
    UniformDigraph,
    /// `s`, layers of width `k`, `t`. Consecutive layers are joined by a
    /// perfect matching plus random arcs in both directions, so the maximum
    /// flow is exactly `k`.
    Layered,
    /// Two dense halves joined by `k` arcs from the `s` half to the `t` half.
    TwoCliquesBridge,
    /// A planted cut `S` (holding `s`) with exactly one arc leaving it and
    /// `k` arcs entering it.
    UnbalancedCut,
}

impl Model {
    pub const ALL: [Model; 4] = [
        Model::UniformDigraph,
        Model::Layered,
        Model::TwoCliquesBridge,
        Model::UnbalancedCut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::UniformDigraph => "uniform-digraph",
            Model::Layered => "layered",
            Model::TwoCliquesBridge => "two-cliques-bridge",
            Model::UnbalancedCut => "unbalanced-cut",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        Model::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FlowError::InvalidParameter(format!("unknown model {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub model: Model,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Layer width, bridge count or reverse-arc count; model default when
    /// absent.
    pub k: Option<usize>,
}

impl GenSpec {
    pub fn new(model: Model, n: usize, m: usize, seed: u64) -> Self {
        GenSpec {
            model,
            n,
            m,
            seed,
            k: None,
        }
    }

    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!(
                "{}-n{}-m{}-k{}-s{}",
                self.model.name(),
                self.n,
                self.m,
                k,
                self.seed
            ),
            None => format!(
                "{}-n{}-m{}-s{}",
                self.model.name(),
                self.n,
                self.m,
                self.seed
            ),
        }
    }
}

fn infeasible(msg: String) -> FlowError {
    FlowError::InvalidParameter(msg)
}

/// Arc set under construction; rejects duplicates and loops.
struct ArcSet {
    seen: HashSet<(VertexId, VertexId)>,
    arcs: Vec<(VertexId, VertexId)>,
}

impl ArcSet {
    fn new() -> Self {
        ArcSet {
            seen: HashSet::new(),
            arcs: Vec::new(),
        }
    }

    fn add(&mut self, u: VertexId, v: VertexId) -> bool {
        u != v && self.seen.insert((u, v)) && {
            self.arcs.push((u, v));
            true
        }
    }

    fn len(&self) -> usize {
        self.arcs.len()
    }

    /// Adds `count` arcs drawn uniformly from `pool` minus those present.
    fn fill_from(
        &mut self,
        pool: &[(VertexId, VertexId)],
        count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let free: Vec<_> = pool
            .iter()
            .copied()
            .filter(|p| p.0 != p.1 && !self.seen.contains(p))
            .collect();
        if count > free.len() {
            return Err(infeasible(format!(
                "only {} free pairs for {count} arcs",
                free.len()
            )));
        }
        let mut picked: Vec<usize> = sample_indices(rng, free.len(), count).into_vec();
        picked.sort_unstable();
        for i in picked {
            self.add(free[i].0, free[i].1);
        }
        Ok(())
    }
}

fn pairs_within(vs: &[VertexId]) -> Vec<(VertexId, VertexId)> {
    let mut out = Vec::new();
    for &u in vs {
        for &v in vs {
            if u != v {
                out.push((u, v));
            }
        }
    }
    out
}

pub fn generate(spec: &GenSpec) -> Result<DirectedMultigraph> {
    let GenSpec {
        model,
        n,
        m,
        seed,
        k,
    } = *spec;
    if n < 2 {
        return Err(infeasible(format!("need n >= 2, got {n}")));
    }
    if m as u64 > (n as u64) * (n as u64 - 1) {
        return Err(infeasible(format!(
            "m = {m} exceeds n(n-1) = {}",
            n * (n - 1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ArcSet::new();
    let (s, t) = match model {
        Model::UniformDigraph => {
            let idx = sample_indices(&mut rng, n * (n - 1), m).into_vec();
            let mut sorted = idx;
            sorted.sort_unstable();
            for i in sorted {
                let u = i / (n - 1);
                let mut v = i % (n - 1);
                if v >= u {
                    v += 1;
                }
                set.add(u, v);
            }
            (0, n - 1)
        }
        Model::Layered => {
            if n < 3 {
                return Err(infeasible("layered model needs n >= 3".into()));
            }
            let inner = n - 2;
            let width = k.unwrap_or_else(|| ((inner as f64).sqrt() as usize).max(1));
            if width == 0 || width > inner {
                return Err(infeasible(format!(
                    "layer width {width} does not fit {inner} inner vertices"
                )));
            }
            let layers = inner / width;
            let (s, t) = (0, n - 1);
            let vertex = |layer: usize, j: usize| 1 + layer * width + j;
            for j in 0..width {
                set.add(s, vertex(0, j));
                set.add(vertex(layers - 1, j), t);
            }
            for l in 0..layers - 1 {
                for j in 0..width {
                    set.add(vertex(l, j), vertex(l + 1, j));
                }
            }
            if m < set.len() {
                return Err(infeasible(format!(
                    "layered model needs m >= {}",
                    set.len()
                )));
            }
            let mut pool = Vec::new();
            for l in 0..layers.saturating_sub(1) {
                for a in 0..width {
                    for b in 0..width {
                        pool.push((vertex(l, a), vertex(l + 1, b)));
                        pool.push((vertex(l + 1, b), vertex(l, a)));
                    }
                }
            }
            let extra = m - set.len();
            set.fill_from(&pool, extra, &mut rng)?;
            (s, t)
        }
        Model::TwoCliquesBridge => {
            if n < 4 {
                return Err(infeasible("two-cliques-bridge needs n >= 4".into()));
            }
            let half = n / 2;
            let a: Vec<VertexId> = (0..half).collect();
            let b: Vec<VertexId> = (half..n).collect();
            let bridges = k.unwrap_or(1);
            if bridges > a.len() * b.len() || bridges > m {
                return Err(infeasible(format!("cannot place {bridges} bridge arcs")));
            }
            let cross: Vec<_> = a
                .iter()
                .flat_map(|&u| b.iter().map(move |&v| (u, v)))
                .collect();
            set.fill_from(&cross, bridges, &mut rng)?;
            let mut inside = pairs_within(&a);
            inside.extend(pairs_within(&b));
            set.fill_from(&inside, m - bridges, &mut rng)?;
            (0, n - 1)
        }
        Model::UnbalancedCut => {
            let half = n / 2;
            let side_s: Vec<VertexId> = (0..half.max(1)).collect();
            let side_t: Vec<VertexId> = (half.max(1)..n).collect();
            let reverse = k.unwrap_or_else(|| (m / 4).max(1));
            if reverse > side_s.len() * side_t.len() || m < reverse + 1 {
                return Err(infeasible(format!(
                    "cannot plant 1 forward and {reverse} reverse arcs with m = {m}"
                )));
            }
            let fu = side_s[rng.random_range(0..side_s.len())];
            let fv = side_t[rng.random_range(0..side_t.len())];
            set.add(fu, fv);
            let back: Vec<_> = side_t
                .iter()
                .flat_map(|&u| side_s.iter().map(move |&v| (u, v)))
                .collect();
            set.fill_from(&back, reverse, &mut rng)?;
            let mut inside = pairs_within(&side_s);
            inside.extend(pairs_within(&side_t));
            set.fill_from(&inside, m - reverse - 1, &mut rng)?;
            (0, n - 1)
        }
    };
    DirectedMultigraph::from_arcs(n, s, t, &set.arcs)
}

/// A seeded mix of all four models with `n <= n_max` and `m <= m_max`.
pub fn fuzz_specs(count: usize, seed: u64, n_max: usize, m_max: usize) -> Vec<GenSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let model = Model::ALL[i % 4];
            let n = rng.random_range(6..=n_max.max(6));
            let cap = (n * (n - 1)).min(m_max);
            let (a, b) = (n / 2, n - n / 2);
            let halves = a * (a - 1) + b * (b - 1) + 1;
            let m = match model {
                Model::Layered => {
                    let width = ((n - 2) as f64).sqrt() as usize;
                    let base = width * ((n - 2) / width + 1);
                    let pool_cap = base + ((n - 2) / width - 1) * (2 * width * width - width);
                    rng.random_range(base..=cap.min(pool_cap).max(base))
                }
                Model::UniformDigraph => rng.random_range(n..=cap),
                Model::TwoCliquesBridge | Model::UnbalancedCut => {
                    rng.random_range(n..=cap.min(halves))
                }
            };
            let spec_seed = rng.random();
            GenSpec::new(model, n, m, spec_seed)
        })
        .collect()
}
