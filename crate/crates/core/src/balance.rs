//! Vertex potentials, approximate arc weights, the gradient they induce, and
//! the energy potential that bounds the number of toggles.
//!
//! Every live arc has a *real* weight `w = weight_of(y(head) - y(tail))` under
//! the current potentials and an *approximate* weight `w_tilde`, which is the
//! real weight at the arc's last refresh. The gradient is built from the
//! approximate weights: each arc adds `w_tilde` at the tail it had when it was
//! refreshed and subtracts it at that head. An arc must be refreshed once
//! `w_tilde * |dy_now - dy_at_refresh|` reaches the detection threshold
//! `epsilon`; between refreshes the two weights agree within a factor
//! `1 +- epsilon`.

use crate::error::{FlowError, Result};
use crate::graph::{ArcId, CutSide, DirectedMultigraph, VertexId};

/// Refreshes between exact gradient rebuilds.
pub const GRADIENT_REBUILD_PERIOD: usize = 1 << 14;

/// Arc weight for potential gap `dy = y(head) - y(tail)`.
#[inline]
pub fn weight_of(dy: f64) -> f64 {
    1.0 / (dy.max(0.0) + 1.0)
}

/// `integral_a^b dx / (max(x, 0) + 1)`, signed.
pub fn weight_integral(a: f64, b: f64) -> f64 {
    let negative = b.min(0.0) - a.min(0.0);
    let positive = b.max(0.0).ln_1p() - a.max(0.0).ln_1p();
    negative + positive
}

/// Energy of an arc with potential gap `dy` under horizon `big_m`:
/// the weight integral from `dy` up to `big_m`.
pub fn energy_of(dy: f64, big_m: f64) -> Result<f64> {
    if dy > big_m {
        return Err(FlowError::EnergyHorizon { spread: dy, big_m });
    }
    Ok(if dy >= 0.0 {
        big_m.ln_1p() - dy.ln_1p()
    } else {
        big_m.ln_1p() - dy
    })
}

/// Weight range guaranteed for `w2 = weight_of(x2)` whenever
/// `|x1 - x2| <= delta / w1`.
pub fn stability_bounds(w1: f64, delta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&delta) {
        return Err(FlowError::InvalidParameter(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    if !(w1 > 0.0 && w1 <= 1.0) {
        return Err(FlowError::InvalidParameter(format!(
            "weight must lie in (0, 1], got {w1}"
        )));
    }
    Ok((w1 / (1.0 + delta), w1 / (1.0 - delta)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ArcRecord {
    w_tilde: f64,
    dy_at_refresh: f64,
    /// Orientation when the record was written; the gradient contribution
    /// lives at these endpoints until the next refresh.
    from: VertexId,
    to: VertexId,
}

/// A weight update that the sparsifier has to mirror.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightChange {
    pub arc: ArcId,
    pub from: VertexId,
    pub to: VertexId,
    pub old: f64,
    pub new: f64,
}

#[derive(Clone, Debug)]
pub struct PotentialState {
    y: Vec<f64>,
    records: Vec<Option<ArcRecord>>,
    g: Vec<f64>,
    big_m: f64,
    epsilon: f64,
    alpha: f64,
    refreshes: usize,
    since_rebuild: usize,
}

impl PotentialState {
    /// Zero potentials; every live arc inserted with weight 1.
    pub fn new(graph: &DirectedMultigraph, alpha: f64, big_m: f64) -> Result<Self> {
        if alpha < 1.0 || !alpha.is_finite() {
            return Err(FlowError::InvalidParameter(format!(
                "alpha must be >= 1, got {alpha}"
            )));
        }
        if big_m.is_nan() || big_m < graph.n() as f64 {
            return Err(FlowError::InvalidParameter(format!(
                "energy horizon M = {big_m} must be at least n = {}",
                graph.n()
            )));
        }
        let mut state = PotentialState {
            y: vec![0.0; graph.n()],
            records: vec![None; graph.arc_capacity()],
            g: vec![0.0; graph.n()],
            big_m,
            epsilon: 1.0 / (8.0 * alpha),
            alpha,
            refreshes: 0,
            since_rebuild: 0,
        };
        for (id, _) in graph.arcs() {
            state.insert_arc(graph, id);
        }
        Ok(state)
    }

    /// `max(n^4, n m)`. The potential spread needed to balance grows with
    /// the number of parallel arcs, which `n^4` alone ignores on
    /// multigraphs; for simple graphs `n m < n^4`.
    pub fn default_big_m(n: usize, m: usize) -> f64 {
        let n = n.max(2) as f64;
        n.powi(4).max(n * m as f64)
    }

    #[inline]
    pub fn y(&self, v: VertexId) -> f64 {
        self.y[v]
    }

    pub fn potentials(&self) -> &[f64] {
        &self.y
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn refresh_count(&self) -> usize {
        self.refreshes
    }

    pub fn is_tracked(&self, arc: ArcId) -> bool {
        self.records.get(arc.0).is_some_and(Option::is_some)
    }

    #[inline]
    pub fn w_tilde(&self, arc: ArcId) -> f64 {
        self.record(arc).w_tilde
    }

    #[inline]
    pub fn dy_at_refresh(&self, arc: ArcId) -> f64 {
        self.record(arc).dy_at_refresh
    }

    /// `(from, to)` endpoints the arc's gradient contribution sits on.
    pub fn recorded_orientation(&self, arc: ArcId) -> (VertexId, VertexId) {
        let r = self.record(arc);
        (r.from, r.to)
    }

    #[inline]
    fn record(&self, arc: ArcId) -> &ArcRecord {
        self.records[arc.0]
            .as_ref()
            .expect("arc not tracked by potential state")
    }

    /// `y(head) - y(tail)` in the arc's current orientation.
    #[inline]
    pub fn dy_now(&self, graph: &DirectedMultigraph, arc: ArcId) -> f64 {
        let a = graph.arc(arc);
        self.y[a.to()] - self.y[a.from()]
    }

    /// Real weight under the current potentials.
    pub fn weight_now(&self, graph: &DirectedMultigraph, arc: ArcId) -> f64 {
        weight_of(self.dy_now(graph, arc))
    }

    /// Starts tracking `arc` with its current real weight. Returns the weight.
    pub fn insert_arc(&mut self, graph: &DirectedMultigraph, arc: ArcId) -> f64 {
        if self.records.len() < graph.arc_capacity() {
            self.records.resize(graph.arc_capacity(), None);
        }
        let a = graph.arc(arc);
        let (from, to) = (a.from(), a.to());
        let dy = self.y[to] - self.y[from];
        let w = weight_of(dy);
        self.g[from] += w;
        self.g[to] -= w;
        self.records[arc.0] = Some(ArcRecord {
            w_tilde: w,
            dy_at_refresh: dy,
            from,
            to,
        });
        w
    }

    /// Stops tracking `arc`, removing its gradient contribution. Returns the
    /// approximate weight it carried.
    pub fn delete_arc(&mut self, arc: ArcId) -> Result<f64> {
        let r = self
            .records
            .get_mut(arc.0)
            .and_then(Option::take)
            .ok_or(FlowError::UnknownArc(arc))?;
        self.g[r.from] -= r.w_tilde;
        self.g[r.to] += r.w_tilde;
        Ok(r.w_tilde)
    }

    /// Delete + insert at the current potentials and orientation.
    pub fn refresh_arc(&mut self, graph: &DirectedMultigraph, arc: ArcId) -> Result<WeightChange> {
        let old = self.delete_arc(arc)?;
        let new = self.insert_arc(graph, arc);
        self.refreshes += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= GRADIENT_REBUILD_PERIOD {
            self.rebuild_gradient();
        }
        let (from, to) = self.recorded_orientation(arc);
        Ok(WeightChange {
            arc,
            from,
            to,
            old,
            new,
        })
    }

    /// Recomputes `g` exactly from the stored approximate weights.
    pub fn rebuild_gradient(&mut self) {
        self.g.iter_mut().for_each(|x| *x = 0.0);
        for r in self.records.iter().flatten() {
            self.g[r.from] += r.w_tilde;
            self.g[r.to] -= r.w_tilde;
        }
        self.since_rebuild = 0;
    }

    #[inline]
    pub fn drift(&self, graph: &DirectedMultigraph, arc: ArcId) -> f64 {
        let r = self.record(arc);
        r.w_tilde * (self.dy_now(graph, arc) - r.dy_at_refresh).abs()
    }

    /// Live arcs whose drift has reached `epsilon`. The caller refreshes them.
    pub fn drifted_arcs(&self, graph: &DirectedMultigraph) -> Vec<ArcId> {
        graph
            .arcs()
            .map(|(id, _)| id)
            .filter(|&id| self.drift(graph, id) >= self.epsilon)
            .collect()
    }

    pub fn gradient_cut_value(&self, cut: &CutSide) -> f64 {
        cut.members().map(|v| self.g[v]).sum()
    }

    /// Approximate weights `(w~(out-boundary), w~(in-boundary))` of `cut`.
    pub fn boundary_weights(&self, graph: &DirectedMultigraph, cut: &CutSide) -> (f64, f64) {
        let mut out = 0.0;
        let mut inn = 0.0;
        for (id, a) in graph.arcs() {
            match (cut.contains(a.from()), cut.contains(a.to())) {
                (true, false) => out += self.w_tilde(id),
                (false, true) => inn += self.w_tilde(id),
                _ => {}
            }
        }
        (out, inn)
    }

    /// Adds `eta` to every potential in `cut`.
    pub fn raise(&mut self, cut: &CutSide, eta: f64) {
        for v in cut.members() {
            self.y[v] += eta;
        }
    }

    pub(crate) fn raise_vertices(&mut self, members: &[VertexId], eta: f64) {
        for &v in members {
            self.y[v] += eta;
        }
    }

    pub fn arc_energy(&self, graph: &DirectedMultigraph, arc: ArcId) -> Result<f64> {
        energy_of(self.dy_now(graph, arc), self.big_m)
    }

    /// Sum of arc energies over every live arc, `(t, s)` links included.
    pub fn total_energy(&self, graph: &DirectedMultigraph) -> Result<f64> {
        graph.arcs().map(|(id, _)| self.arc_energy(graph, id)).sum()
    }

    /// `max y - min y`.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn check_horizon(&self) -> Result<()> {
        let spread = self.spread();
        if spread > self.big_m {
            return Err(FlowError::EnergyHorizon {
                spread,
                big_m: self.big_m,
            });
        }
        Ok(())
    }

    /// Largest `|sum_v g(v)|` deviation from zero.
    pub fn gradient_sum(&self) -> f64 {
        self.g.iter().sum()
    }

    /// `max(1, 1 / min w~)`: the range bound U of the weight interval [1/U, U].
    pub fn weight_range_bound(&self) -> f64 {
        let min_w = self
            .records
            .iter()
            .flatten()
            .map(|r| r.w_tilde)
            .fold(f64::INFINITY, f64::min);
        if min_w.is_finite() {
            (1.0 / min_w).max(1.0)
        } else {
            1.0
        }
    }

    /// Checks `w~/(1+eps) <= w <= w~/(1-eps)` for every live arc; returns the
    /// first offender.
    pub fn sandwich_violation(&self, graph: &DirectedMultigraph) -> Option<ArcId> {
        let eps = self.epsilon;
        graph.arcs().map(|(id, _)| id).find(|&id| {
            let wt = self.w_tilde(id);
            let w = self.weight_now(graph, id);
            let slack = 1e-12 * wt;
            w < wt / (1.0 + eps) - slack || w > wt / (1.0 - eps) + slack
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum EnergyEventKind {
    Initial,
    Toggle,
    Augmentation,
}

impl EnergyEventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnergyEventKind::Initial => "initial",
            EnergyEventKind::Toggle => "toggle",
            EnergyEventKind::Augmentation => "augmentation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EnergyEvent {
    pub kind: EnergyEventKind,
    pub delta: f64,
    pub total: f64,
}

/// Per-augmentation bookkeeping needed to audit the energy-increase bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentationEnergy {
    pub delta: f64,
    /// `y(t) - y(s) + (n - 1) ln(M + 1)` at flip time.
    pub bound: f64,
    /// `y(t) - y(s)` at flip time.
    pub terminal_gap: f64,
    /// Total energy just before the flip.
    pub energy_before: f64,
    pub ts_links: usize,
}

/// Running total of the energy, updated incrementally per event.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    pub initial: f64,
    pub total: f64,
    pub toggle_deltas: Vec<f64>,
    pub augmentations: Vec<AugmentationEnergy>,
    events: Option<Vec<EnergyEvent>>,
}

impl EnergyLedger {
    pub fn new(initial: f64, trace: bool) -> Self {
        EnergyLedger {
            initial,
            total: initial,
            toggle_deltas: Vec::new(),
            augmentations: Vec::new(),
            events: trace.then(|| {
                vec![EnergyEvent {
                    kind: EnergyEventKind::Initial,
                    delta: initial,
                    total: initial,
                }]
            }),
        }
    }

    pub fn record_toggle(&mut self, delta: f64) {
        self.total += delta;
        self.toggle_deltas.push(delta);
        if let Some(ev) = &mut self.events {
            ev.push(EnergyEvent {
                kind: EnergyEventKind::Toggle,
                delta,
                total: self.total,
            });
        }
    }

    pub fn record_augmentation(&mut self, rec: AugmentationEnergy) {
        self.total += rec.delta;
        self.augmentations.push(rec);
        if let Some(ev) = &mut self.events {
            ev.push(EnergyEvent {
                kind: EnergyEventKind::Augmentation,
                delta: rec.delta,
                total: self.total,
            });
        }
    }

    /// Event trace, present when tracing was requested.
    pub fn events(&self) -> Option<&[EnergyEvent]> {
        self.events.as_deref()
    }

    /// CSV rows `event_type,delta,total` with a header line.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("event_type,delta,total\n");
        for e in self.events().unwrap_or_default() {
            s.push_str(&format!(
                "{},{:.12},{:.12}\n",
                e.kind.as_str(),
                e.delta,
                e.total
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_arc() -> DirectedMultigraph {
        DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1)]).unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_of(0.0), 1.0);
        assert_eq!(weight_of(1.0), 0.5);
        assert_eq!(weight_of(-5.0), 1.0);
    }

    #[test]
    fn energy_examples() {
        let m = 10.0;
        assert!((energy_of(0.0, m).unwrap() - 11f64.ln()).abs() < 1e-15);
        assert!(energy_of(m, m).unwrap().abs() < 1e-15);
        assert!((energy_of(-3.0, m).unwrap() - 5.397_895_272_798_371).abs() < 1e-12);
        assert!(energy_of(10.5, m).is_err());
    }

    #[test]
    fn weight_integral_matches_energy_difference() {
        for &(a, b) in &[(-2.0, 3.0), (0.5, 0.25), (-1.0, -0.5), (4.0, -4.0)] {
            let direct = energy_of(a, 100.0).unwrap() - energy_of(b, 100.0).unwrap();
            assert!((weight_integral(a, b) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability_bounds(0.7, 0.0).unwrap(), (0.7, 0.7));
        let (lo, hi) = stability_bounds(0.5, 0.5).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        for x2 in [0.0, 2.0] {
            let w2 = weight_of(x2);
            assert!(lo - 1e-15 <= w2 && w2 <= hi + 1e-15);
        }
        assert!(stability_bounds(0.5, 1.0).is_err());
        assert!(stability_bounds(0.0, 0.5).is_err());
    }

    #[test]
    fn dy_flips_sign_with_arc() {
        let mut g = single_arc();
        let mut st = PotentialState::new(&g, 1.0, 16.0).unwrap();
        assert_eq!(st.dy_now(&g, ArcId(0)), 0.0);
        st.y[1] = 0.75;
        assert_eq!(st.dy_now(&g, ArcId(0)), 0.75);
        g.flip_path(&[ArcId(0)]).unwrap();
        assert_eq!(st.dy_now(&g, ArcId(0)), -0.75);
    }

    #[test]
    fn refresh_single_arc() {
        let g = single_arc();
        let mut st = PotentialState::new(&g, 1.0, 16.0).unwrap();
        assert_eq!(st.gradient(), &[1.0, -1.0]);
        let before = st.gradient().to_vec();
        st.refresh_arc(&g, ArcId(0)).unwrap();
        assert_eq!(st.gradient(), &before[..]);

        st.y[1] = 1.0;
        let ch = st.refresh_arc(&g, ArcId(0)).unwrap();
        assert_eq!((ch.old, ch.new), (1.0, 0.5));
        assert_eq!(st.gradient(), &[0.5, -0.5]);
    }

    #[test]
    fn drift_threshold_is_inclusive() {
        let g = single_arc();
        let mut st = PotentialState::new(&g, 1.0, 16.0).unwrap();
        assert!(st.drifted_arcs(&g).is_empty());
        st.y[0] = st.epsilon();
        assert_eq!(st.drifted_arcs(&g), vec![ArcId(0)]);
    }

    #[test]
    fn initial_energy_is_m_ln_m_plus_one() {
        let g = DirectedMultigraph::from_arcs(3, 0, 2, &[(0, 1), (1, 2), (2, 0), (0, 2)]).unwrap();
        let st = PotentialState::new(&g, 1.0, 81.0).unwrap();
        assert!((st.total_energy(&g).unwrap() - 4.0 * 82f64.ln()).abs() < 1e-12);
        let empty = DirectedMultigraph::new(3, 0, 2).unwrap();
        let st = PotentialState::new(&empty, 1.0, 81.0).unwrap();
        assert_eq!(st.total_energy(&empty).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = single_arc();
        assert!(PotentialState::new(&g, 0.5, 16.0).is_err());
        assert!(PotentialState::new(&g, 1.0, 1.0).is_err());
    }

    #[test]
    fn horizon_violation_detected() {
        let g = single_arc();
        let mut st = PotentialState::new(&g, 1.0, 2.0).unwrap();
        st.y[1] = 3.0;
        assert!(st.check_horizon().is_err());
        assert!(st.arc_energy(&g, ArcId(0)).is_err());
    }

    #[test]
    fn ledger_trace() {
        let mut l = EnergyLedger::new(10.0, true);
        l.record_toggle(-0.5);
        l.record_augmentation(AugmentationEnergy {
            delta: 2.0,
            bound: 5.0,
            terminal_gap: 0.0,
            energy_before: 9.5,
            ts_links: 1,
        });
        assert_eq!(l.total, 11.5);
        let csv = l.trace_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(2).unwrap().starts_with("toggle,-0.5"));
    }
}
