//! Dynamic sparsifier that keeps an out-arc of every unbalanced cut.
//!
//! Arcs are grouped into buckets by `floor(log2 w~)`. Inside a bucket the
//! weights differ by less than a factor of two, so the bucket is treated as
//! an unweighted graph. Each bucket holds a hierarchy of levels: level 0 is
//! the whole bucket, the intra-cluster arcs of an expander decomposition of
//! level `j` stay at level `j`, and the boundary arcs move to level `j + 1`.
//! A query samples every level independently with probability
//! `min(1, q beta n / (t m_j))`.
//!
//! Hierarchies are rebuilt lazily. A bucket whose changes since the last
//! rebuild stay under the threshold reuses its stale hierarchy and adds
//! every changed arc to the sample.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{FlowError, Result};
use crate::expander::{decompose, Partition, UGraph};
use crate::graph::{ArcId, VertexId};
use crate::par::{self, ExecMode};

/// Arc endpoints of one bucket, keyed by id.
pub type BucketArcs = BTreeMap<ArcId, (VertexId, VertexId)>;

/// `floor(log2 w)`, read off the binary exponent.
pub fn bucket_index(w: f64) -> Result<i32> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(FlowError::InvalidParameter(format!(
            "bucket_index needs a positive finite weight, got {w}"
        )));
    }
    let bits = w.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        let mantissa = bits & ((1u64 << 52) - 1);
        Ok(-1074 + (63 - mantissa.leading_zeros() as i32))
    } else {
        Ok(exp - 1023)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsifierConfig {
    pub phi: f64,
    /// Union-bound exponent; failure probability per query is about
    /// `n^-(c-1)`.
    pub c: f64,
    /// Depth of the residue level, which is kept whole.
    pub max_depth: usize,
    /// Fraction of a bucket that may change before its hierarchy is rebuilt.
    pub rebuild_threshold: f64,
    pub seed: u64,
    /// Build and sample hierarchies even when every probability would be 1.
    pub eager: bool,
    /// Replaces the computed quality `q`; for stress tests only.
    pub quality_override: Option<f64>,
    pub exec: ExecMode,
}

impl Default for SparsifierConfig {
    fn default() -> Self {
        SparsifierConfig {
            phi: 0.1,
            c: 3.0,
            max_depth: 4,
            rebuild_threshold: 0.1,
            seed: 0,
            eager: false,
            quality_override: None,
            exec: ExecMode::Sequential,
        }
    }
}

impl SparsifierConfig {
    /// `q = ceil(2 c t / phi * ln n)` with `t = max_depth + 1` levels.
    pub fn quality(&self, n: usize) -> f64 {
        if let Some(q) = self.quality_override {
            return q;
        }
        let t = (self.max_depth + 1) as f64;
        (2.0 * self.c * t / self.phi * (n.max(2) as f64).ln()).ceil()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub depth: usize,
    /// `G_j`: arcs reaching this level.
    pub arcs: Vec<ArcId>,
    /// Arcs sampled at this level.
    pub intra: Vec<ArcId>,
    pub partition: Option<Partition>,
    /// Kept whole (`p = 1`): the depth cap was hit or the decomposition
    /// made no progress.
    pub residue: bool,
}

#[derive(Clone, Debug, Default)]
pub struct WeightBucket {
    pub index: i32,
    arcs: BucketArcs,
    levels: Vec<Level>,
    built: bool,
    changed: BTreeSet<ArcId>,
    dirty: bool,
}

impl WeightBucket {
    pub fn arcs(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.arcs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    fn needs_rebuild(&self, threshold: f64) -> bool {
        !self.built || self.changed.len() as f64 > threshold * self.arcs.len() as f64
    }
}

/// Builds the level hierarchy over `arcs` on `n` vertices.
pub fn build_hierarchy(n: usize, arcs: &BucketArcs, cfg: &SparsifierConfig) -> Result<Vec<Level>> {
    let mut levels = Vec::new();
    let mut current: Vec<ArcId> = arcs.keys().copied().collect();
    for depth in 0.. {
        let m_j = current.len();
        if m_j == 0 {
            break;
        }
        if depth >= cfg.max_depth {
            levels.push(Level {
                depth,
                intra: current.clone(),
                arcs: current,
                partition: None,
                residue: true,
            });
            break;
        }
        let edges = current.iter().map(|a| arcs[a]).collect();
        let padding = m_j.div_ceil(n.max(1)).max(1) as u64;
        let ug = UGraph::new(n, edges)?.add_self_loops(padding);
        let partition = decompose(&ug, cfg.phi, ExecMode::Sequential)?;
        if partition.boundary.len() == m_j {
            levels.push(Level {
                depth,
                intra: current.clone(),
                arcs: current,
                partition: Some(partition),
                residue: true,
            });
            break;
        }
        let mut crossing = vec![false; m_j];
        for &i in &partition.boundary {
            crossing[i] = true;
        }
        let intra = current
            .iter()
            .zip(&crossing)
            .filter(|(_, &c)| !c)
            .map(|(&a, _)| a)
            .collect();
        let next = current
            .iter()
            .zip(&crossing)
            .filter(|(_, &c)| c)
            .map(|(&a, _)| a)
            .collect();
        levels.push(Level {
            depth,
            arcs: current,
            intra,
            partition: Some(partition),
            residue: false,
        });
        current = next;
    }
    Ok(levels)
}

/// Draws `s ~ Binomial(|intra|, p)`, then `s` distinct arcs uniformly.
pub fn sample_level<R: rand::Rng>(intra: &[ArcId], p: f64, rng: &mut R) -> Vec<ArcId> {
    if p >= 1.0 {
        return intra.to_vec();
    }
    if intra.is_empty() || p <= 0.0 {
        return Vec::new();
    }
    let s = Binomial::new(intra.len() as u64, p)
        .expect("p lies in (0, 1)")
        .sample(rng) as usize;
    let mut picked: Vec<ArcId> = sample_indices(rng, intra.len(), s)
        .into_iter()
        .map(|i| intra[i])
        .collect();
    picked.sort_unstable();
    picked
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SampleStats {
    pub buckets: usize,
    pub levels: usize,
    pub sample_size: usize,
    pub rebuilds: usize,
    pub bypassed: usize,
    pub forced: usize,
}

#[derive(Clone, Debug)]
pub struct Sample {
    /// Sorted, distinct.
    pub arcs: Vec<ArcId>,
    pub stats: SampleStats,
}

impl Sample {
    /// Membership mask indexed by arc id.
    pub fn mask(&self, capacity: usize) -> Vec<bool> {
        let mut m = vec![false; capacity];
        for a in &self.arcs {
            if a.0 < capacity {
                m[a.0] = true;
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct SparsifierState {
    n: usize,
    cfg: SparsifierConfig,
    q: f64,
    buckets: BTreeMap<i32, WeightBucket>,
    location: BTreeMap<ArcId, i32>,
    queries: u64,
    total_rebuilds: usize,
}

impl SparsifierState {
    pub fn new(n: usize, cfg: SparsifierConfig) -> Result<Self> {
        if !(cfg.phi > 0.0 && cfg.phi < 1.0) {
            return Err(FlowError::InvalidParameter(format!(
                "sparsifier phi = {} must lie in (0, 1)",
                cfg.phi
            )));
        }
        if !(cfg.c >= 1.0) || !(cfg.rebuild_threshold >= 0.0) {
            return Err(FlowError::InvalidParameter(
                "sparsifier needs c >= 1 and a nonnegative threshold".into(),
            ));
        }
        Ok(SparsifierState {
            n,
            q: cfg.quality(n),
            cfg,
            buckets: BTreeMap::new(),
            location: BTreeMap::new(),
            queries: 0,
            total_rebuilds: 0,
        })
    }

    pub fn config(&self) -> &SparsifierConfig {
        &self.cfg
    }

    pub fn quality(&self) -> f64 {
        self.q
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn total_rebuilds(&self) -> usize {
        self.total_rebuilds
    }

    pub fn len(&self) -> usize {
        self.location.len()
    }

    pub fn is_empty(&self) -> bool {
        self.location.is_empty()
    }

    pub fn contains(&self, arc: ArcId) -> bool {
        self.location.contains_key(&arc)
    }

    pub fn bucket_of(&self, arc: ArcId) -> Option<i32> {
        self.location.get(&arc).copied()
    }

    pub fn bucket(&self, index: i32) -> Option<&WeightBucket> {
        self.buckets.get(&index)
    }

    /// Nonempty buckets in increasing index order.
    pub fn buckets(&self) -> impl Iterator<Item = &WeightBucket> + '_ {
        self.buckets.values().filter(|b| !b.is_empty())
    }

    pub fn insert_arc(&mut self, arc: ArcId, from: VertexId, to: VertexId, w: f64) -> Result<()> {
        if from >= self.n || to >= self.n {
            return Err(FlowError::InvalidGraph(format!(
                "arc endpoints ({from}, {to}) out of range"
            )));
        }
        if self.location.contains_key(&arc) {
            return Err(FlowError::InvariantBreach(format!(
                "arc {} inserted twice into the sparsifier",
                arc.0
            )));
        }
        let index = bucket_index(w)?;
        let bucket = self.buckets.entry(index).or_insert_with(|| WeightBucket {
            index,
            ..WeightBucket::default()
        });
        bucket.arcs.insert(arc, (from, to));
        bucket.changed.insert(arc);
        bucket.dirty = true;
        self.location.insert(arc, index);
        Ok(())
    }

    pub fn delete_arc(&mut self, arc: ArcId) -> Result<()> {
        let index = self
            .location
            .remove(&arc)
            .ok_or(FlowError::UnknownArc(arc))?;
        let bucket = self.buckets.get_mut(&index).expect("located bucket exists");
        bucket.arcs.remove(&arc);
        bucket.changed.insert(arc);
        bucket.dirty = true;
        Ok(())
    }

    /// A weight or orientation change: delete then insert.
    pub fn update_arc(&mut self, arc: ArcId, from: VertexId, to: VertexId, w: f64) -> Result<()> {
        self.delete_arc(arc)?;
        self.insert_arc(arc, from, to, w)
    }

    /// Rebuilds the hierarchy of bucket `index` from scratch.
    pub fn rebuild_bucket(&mut self, index: i32) -> Result<()> {
        let bucket = self
            .buckets
            .get_mut(&index)
            .ok_or_else(|| FlowError::InvalidParameter(format!("no bucket with index {index}")))?;
        bucket.levels = build_hierarchy(self.n, &bucket.arcs, &self.cfg)?;
        bucket.built = true;
        bucket.changed.clear();
        bucket.dirty = false;
        self.total_rebuilds += 1;
        Ok(())
    }

    /// Whether every level of a bucket of `m` arcs would be kept whole.
    fn saturated(&self, m: usize, beta: f64) -> bool {
        let t_max = (self.cfg.max_depth + 1) as f64;
        self.q * beta * self.n as f64 / t_max >= m as f64
    }

    fn level_probability(&self, beta: f64, t_used: usize, m_j: usize) -> f64 {
        (self.q * 2.0 * beta / (2.0 * t_used as f64) * self.n as f64 / m_j as f64).min(1.0)
    }

    /// One `Sparsifier(beta)` query; every bucket is sampled with `2 beta`
    /// against its halved weight range, which is where the factor 2 in the
    /// probability comes from.
    pub fn sparsify(&mut self, beta: f64) -> Result<Sample> {
        if !(beta >= 1.0) {
            return Err(FlowError::InvalidParameter(format!(
                "beta = {beta} must be >= 1"
            )));
        }
        let mut stats = SampleStats::default();
        let mut out: Vec<ArcId> = Vec::new();

        let mut to_build: Vec<i32> = Vec::new();
        for (&index, b) in &self.buckets {
            if b.is_empty() || (!self.cfg.eager && self.saturated(b.len(), beta)) {
                continue;
            }
            if b.needs_rebuild(self.cfg.rebuild_threshold) {
                to_build.push(index);
            }
        }
        let jobs: Vec<(i32, &BucketArcs)> = to_build
            .iter()
            .map(|i| (*i, &self.buckets[i].arcs))
            .collect();
        let (n, cfg) = (self.n, self.cfg);
        let built = par::map_owned(self.cfg.exec, jobs, |(i, arcs)| {
            (i, build_hierarchy(n, arcs, &cfg))
        });
        for (i, levels) in built {
            let b = self
                .buckets
                .get_mut(&i)
                .expect("bucket scheduled for rebuild");
            b.levels = levels?;
            b.built = true;
            b.changed.clear();
            b.dirty = false;
            stats.rebuilds += 1;
            self.total_rebuilds += 1;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(self.queries);
        self.queries += 1;
        for b in self.buckets.values() {
            if b.is_empty() {
                continue;
            }
            stats.buckets += 1;
            if !self.cfg.eager && self.saturated(b.len(), beta) {
                stats.bypassed += 1;
                out.extend(b.arcs.keys());
                continue;
            }
            let t_used = b.levels.len().max(1);
            for level in &b.levels {
                stats.levels += 1;
                let live: Vec<ArcId> = level
                    .intra
                    .iter()
                    .copied()
                    .filter(|a| b.arcs.contains_key(a))
                    .collect();
                let p = if level.residue {
                    1.0
                } else {
                    self.level_probability(beta, t_used, level.arcs.len())
                };
                out.extend(sample_level(&live, p, &mut rng));
            }
            for a in &b.changed {
                if b.arcs.contains_key(a) {
                    stats.forced += 1;
                    out.push(*a);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        stats.sample_size = out.len();
        if self.cfg.quality_override.is_none() {
            let bound = self.q * beta * self.n as f64 * stats.buckets as f64;
            if out.len() as f64 > bound {
                return Err(FlowError::InvariantBreach(format!(
                    "sample of {} arcs exceeds q beta n buckets = {bound}",
                    out.len()
                )));
            }
        }
        Ok(Sample { arcs: out, stats })
    }
}
