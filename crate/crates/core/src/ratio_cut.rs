//! Minimum ratio cuts and the toggle loop that balances the residual graph.
//!
//! The residual graph is viewed as an undirected graph weighted by the
//! approximate arc weights, with arc directions encoded in the gradient `g`.
//! For any cut, `g(S) = w~(out) - w~(in)`, so a cut with very negative
//! `g(S) / w~(boundary)` carries far more weight inwards than outwards. The
//! balance loop raises the potentials of such a cut by a small step, which
//! lowers the weight of its in-arcs, until no cut has ratio `<= -1/(3 alpha)`.
//!
//! The oracle is exact (`alpha = 1`): brute-force enumeration for small
//! graphs, Dinkelbach's method over parametric minimum cuts otherwise. Its
//! answer depends only on `(w~, g)`, which change only when arcs are
//! refreshed, so the loop reuses the last cut until a refresh happens.

use std::collections::HashMap;

use crate::balance::{weight_integral, EnergyLedger, PotentialState, WeightChange};
use crate::dinic::{capacitated_maxflow, CapacitatedNetwork};
use crate::error::{FlowError, Result};
use crate::graph::{ArcId, CutSide, DirectedMultigraph, VertexId};
use crate::par::{self, ExecMode};

/// Certified per-toggle energy decrease at `alpha = 1` (`17 / 3969`); see
/// [`toggle_energy_floor`].
pub const TOGGLE_ENERGY_FLOOR: f64 = 17.0 / 3969.0;

/// Lower bound on the energy decrease of one toggle with detection threshold
/// `eps = 1/(8 alpha)` and step `eta = 1/(16 alpha u)`.
///
/// With `delta = eps`, the out-boundary gains at most
/// `eta w(out) / (1 - delta)` and the in-boundary loses at least
/// `eta w(in) / (1 + delta)`. A cut of ratio `<= -1/(3 alpha)` has
/// `w(out) <= (3a-1)/(3a+1) (1+eps)/(1-eps) w(in)`, so the change is at most
/// `eta * bracket * w(in)` with `bracket < 0`. Then `w(in) >= w~(in)/(1+eps)`,
/// `w~(in) >= u(boundary)/2` and `eta >= 1/(16 alpha^2 u(boundary))`.
pub fn toggle_energy_floor(alpha: f64) -> f64 {
    let eps = 1.0 / (8.0 * alpha);
    let delta = eps;
    let imbalance = (3.0 * alpha - 1.0) / (3.0 * alpha + 1.0);
    let bracket = imbalance * (1.0 + eps) / (1.0 - eps) / (1.0 - delta) - 1.0 / (1.0 + delta);
    -bracket / (1.0 + eps) / 2.0 / (16.0 * alpha * alpha)
}

/// Undirected weighted image of the residual graph plus the gradient.
/// Parallel arcs are merged and self-loops dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct UndirectedInstance {
    pub n: usize,
    pub edges: Vec<(VertexId, VertexId, f64)>,
    pub g: Vec<f64>,
}

impl UndirectedInstance {
    pub fn new(n: usize, edges: Vec<(VertexId, VertexId, f64)>, g: Vec<f64>) -> Result<Self> {
        if g.len() != n {
            return Err(FlowError::InvalidParameter(format!(
                "gradient has {} entries for {n} vertices",
                g.len()
            )));
        }
        let mut merged: HashMap<(VertexId, VertexId), f64> = HashMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(FlowError::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range"
                )));
            }
            if !(w > 0.0) {
                return Err(FlowError::InvalidParameter(format!(
                    "edge weight {w} must be positive"
                )));
            }
            if u != v {
                *merged.entry((u.min(v), u.max(v))).or_default() += w;
            }
        }
        let mut edges: Vec<_> = merged.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        edges.sort_by_key(|a| (a.0, a.1));
        Ok(UndirectedInstance { n, edges, g })
    }

    /// Snapshot of `(w~, g)` from the potential state.
    pub fn from_state(state: &PotentialState, graph: &DirectedMultigraph) -> Self {
        let edges = graph
            .arcs()
            .map(|(id, a)| (a.from(), a.to(), state.w_tilde(id)))
            .collect();
        Self::new(graph.n(), edges, state.gradient().to_vec()).expect("state weights are positive")
    }

    /// `(g(S), w(boundary of S))`.
    pub fn evaluate(&self, mask: &[bool]) -> (f64, f64) {
        let g_val = (0..self.n).filter(|&v| mask[v]).map(|v| self.g[v]).sum();
        let w = self
            .edges
            .iter()
            .filter(|(u, v, _)| mask[*u] != mask[*v])
            .map(|e| e.2)
            .sum();
        (g_val, w)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, _) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    fn check_usable(&self) -> Result<()> {
        if self.n < 2 {
            return Err(FlowError::InvalidGraph(
                "need at least two vertices for a cut".into(),
            ));
        }
        if !self.is_connected() {
            return Err(FlowError::Disconnected);
        }
        Ok(())
    }

    fn ratio_cut(&self, mask: Vec<bool>) -> Result<RatioCut> {
        let (g_val, u_val) = self.evaluate(&mask);
        Ok(RatioCut {
            cut: CutSide::from_mask(mask)?,
            g_val,
            u_val,
            ratio: g_val / u_val,
        })
    }
}

/// A cut `C` with `g(C) = g_val` and `w~(boundary of C) <= u_val`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioCut {
    pub cut: CutSide,
    pub g_val: f64,
    pub u_val: f64,
    pub ratio: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OracleMethod {
    BruteForce,
    #[default]
    Dinkelbach,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub alpha: f64,
    pub method: OracleMethod,
    /// Relative tolerance; scaled by `sum |g| + sum w`.
    pub dinkelbach_tol: f64,
    pub max_brute_n: usize,
    pub exec: ExecMode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            alpha: 1.0,
            method: OracleMethod::Dinkelbach,
            dinkelbach_tol: 1e-12,
            max_brute_n: 16,
            exec: ExecMode::Sequential,
        }
    }
}

/// `true` if the member list of `a` precedes that of `b` lexicographically.
fn lex_less(a: u64, b: u64) -> bool {
    if a == b {
        return false;
    }
    let d = (a ^ b).trailing_zeros();
    if a >> d & 1 == 1 {
        b >> d != 0
    } else {
        a >> d == 0
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    bits: u64,
    ratio: f64,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    let tol = 1e-12 * (1.0 + a.ratio.abs().max(b.ratio.abs()));
    if a.ratio < b.ratio - tol {
        a
    } else if b.ratio < a.ratio - tol {
        b
    } else if lex_less(a.bits, b.bits) {
        a
    } else {
        b
    }
}

/// Exact minimum of `g(S) / w(boundary)` over all `2^n - 2` proper cuts.
/// Ties go to the lexicographically smallest member set.
pub fn brute_force_min_ratio_cut(
    inst: &UndirectedInstance,
    max_n: usize,
    exec: ExecMode,
) -> Result<RatioCut> {
    let n = inst.n;
    if n > max_n || n > 62 {
        return Err(FlowError::OversizeBruteForce {
            n,
            max: max_n.min(62),
        });
    }
    inst.check_usable()?;
    let mut nbr: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, v, w) in &inst.edges {
        nbr[u].push((v, w));
        nbr[v].push((u, w));
    }
    let full = (1u64 << n) - 1;
    let eval = |bits: u64| -> Candidate {
        let mut g_val = 0.0;
        let mut w = 0.0;
        for (v, adj) in nbr.iter().enumerate() {
            if bits >> v & 1 == 1 {
                g_val += inst.g[v];
                for &(u, wt) in adj {
                    if bits >> u & 1 == 0 {
                        w += wt;
                    }
                }
            }
        }
        Candidate {
            bits,
            ratio: g_val / w,
        }
    };
    let best = par::fold_chunks(
        exec,
        1..full,
        4096,
        |range| range.map(eval).reduce(better).expect("chunks are nonempty"),
        better,
    )
    .expect("n >= 2 leaves at least two cuts");
    let mask = (0..n).map(|v| best.bits >> v & 1 == 1).collect();
    inst.ratio_cut(mask)
}

/// Dinkelbach iterates plus the `lambda` sequence they produced.
#[derive(Clone, Debug)]
pub struct DinkelbachTrace {
    pub cut: RatioCut,
    pub lambdas: Vec<f64>,
    pub iterations: usize,
}

/// Exact minimum ratio cut by Dinkelbach's method.
pub fn dinkelbach_min_ratio_cut(inst: &UndirectedInstance, tol: f64) -> Result<RatioCut> {
    dinkelbach_trace(inst, tol, None).map(|t| t.cut)
}

/// Dinkelbach's method, optionally warm-started from `hint`.
///
/// Each iteration minimises `g(S) + |lambda| w(boundary of S)` as a minimum
/// cut: a source `sigma` feeds every vertex with `g(v) < 0` at capacity
/// `-g(v)`, every vertex with `g(v) > 0` drains into the sink at capacity
/// `g(v)`, and each undirected edge becomes two opposite arcs of capacity
/// `|lambda| w`. The source side of the minimum cut is the minimiser, and
/// `lambda` moves to its ratio while the minimum stays below `-tol`.
pub fn dinkelbach_trace(
    inst: &UndirectedInstance,
    tol: f64,
    hint: Option<&CutSide>,
) -> Result<DinkelbachTrace> {
    inst.check_usable()?;
    let n = inst.n;
    if inst.g.iter().all(|&x| x >= -1e-12) {
        let argmin = (0..n).fold(0, |best, v| if inst.g[v] < inst.g[best] { v } else { best });
        let mut mask = vec![false; n];
        mask[argmin] = true;
        return Ok(DinkelbachTrace {
            cut: inst.ratio_cut(mask)?,
            lambdas: Vec::new(),
            iterations: 0,
        });
    }
    let scale: f64 =
        inst.g.iter().map(|x| x.abs()).sum::<f64>() + inst.edges.iter().map(|e| e.2).sum::<f64>();
    let tol_abs = tol * scale;

    let mut current = inst.ratio_cut(inst.g.iter().map(|&x| x < 0.0).collect())?;
    if let Some(h) = hint.filter(|h| h.vertex_count() == n) {
        let warm = inst.ratio_cut(h.mask().to_vec())?;
        if warm.ratio < current.ratio {
            current = warm;
        }
    }
    let mut lambdas = vec![current.ratio];
    let limit = 10 * n;
    let (sigma, tau) = (n, n + 1);
    for iteration in 1..=limit {
        let scale_w = -current.ratio;
        let mut net = CapacitatedNetwork::new(n + 2);
        for (v, &gv) in inst.g.iter().enumerate() {
            if gv < 0.0 {
                net.add_arc(sigma, v, -gv)?;
            } else if gv > 0.0 {
                net.add_arc(v, tau, gv)?;
            }
        }
        for &(u, v, w) in &inst.edges {
            net.add_arc(u, v, scale_w * w)?;
            net.add_arc(v, u, scale_w * w)?;
        }
        let flow = capacitated_maxflow(&mut net, sigma, tau)?;
        let mask: Vec<bool> = flow.source_side[..n].to_vec();
        let size = mask.iter().filter(|&&b| b).count();
        if size == 0 || size == n {
            return Ok(DinkelbachTrace {
                cut: current,
                lambdas,
                iterations: iteration,
            });
        }
        let (g_val, w) = inst.evaluate(&mask);
        if g_val + scale_w * w >= -tol_abs {
            return Ok(DinkelbachTrace {
                cut: current,
                lambdas,
                iterations: iteration,
            });
        }
        let next = inst.ratio_cut(mask)?;
        if next.ratio >= current.ratio {
            return Err(FlowError::InvariantBreach(format!(
                "dinkelbach ratio did not decrease: {} -> {}",
                current.ratio, next.ratio
            )));
        }
        lambdas.push(next.ratio);
        current = next;
    }
    Err(FlowError::NonConvergence { iterations: limit })
}

/// Runs the configured oracle on the current `(w~, g)`.
pub fn min_ratio_cut(
    state: &PotentialState,
    graph: &DirectedMultigraph,
    cfg: &OracleConfig,
    hint: Option<&CutSide>,
) -> Result<RatioCut> {
    let inst = UndirectedInstance::from_state(state, graph);
    match cfg.method {
        OracleMethod::BruteForce => brute_force_min_ratio_cut(&inst, cfg.max_brute_n, cfg.exec),
        OracleMethod::Dinkelbach => {
            dinkelbach_trace(&inst, cfg.dinkelbach_tol, hint).map(|t| t.cut)
        }
    }
}

/// Raises `y` by `eta` on `rc.cut` and returns every arc whose drift has
/// reached the detection threshold. The caller must refresh them.
pub fn toggle_cut(
    state: &mut PotentialState,
    graph: &DirectedMultigraph,
    rc: &RatioCut,
    eta: f64,
) -> Result<Vec<ArcId>> {
    check_eta(rc, eta)?;
    state.raise(&rc.cut, eta);
    Ok(state.drifted_arcs(graph))
}

fn check_eta(rc: &RatioCut, eta: f64) -> Result<()> {
    if !(eta > 0.0) || eta > (1.0 / rc.u_val) * (1.0 + 1e-12) {
        return Err(FlowError::InvalidParameter(format!(
            "toggle step {eta} outside (0, 1/u] with u = {}",
            rc.u_val
        )));
    }
    Ok(())
}

/// Boundary arcs of a fixed cut that evolve identically under toggles: same
/// endpoint potentials, same `w~` and same reference gap.
struct BoundaryGroup {
    arcs: Vec<ArcId>,
    from: VertexId,
    to: VertexId,
    w_tilde: f64,
    dy_ref: f64,
    dy: f64,
}

/// The cut currently being toggled. Only boundary arcs change their
/// potential gap under a toggle, so only they can newly drift or change
/// energy.
struct ActiveCut {
    members: Vec<VertexId>,
    groups: Vec<BoundaryGroup>,
}

impl ActiveCut {
    fn new(state: &PotentialState, graph: &DirectedMultigraph, cut: &CutSide) -> Self {
        let mut keyed: Vec<([u64; 4], ArcId, VertexId, VertexId)> = graph
            .arcs()
            .filter(|(_, a)| cut.contains(a.from()) != cut.contains(a.to()))
            .map(|(id, a)| {
                let (from, to) = (a.from(), a.to());
                let key = [
                    state.y(from).to_bits(),
                    state.y(to).to_bits(),
                    state.w_tilde(id).to_bits(),
                    state.dy_at_refresh(id).to_bits(),
                ];
                (key, id, from, to)
            })
            .collect();
        keyed.sort_unstable_by_key(|k| (cut.contains(k.2), k.0, k.1));
        let mut groups: Vec<BoundaryGroup> = Vec::new();
        let mut last = None;
        for (key, id, from, to) in keyed {
            let side = cut.contains(from);
            if last != Some((side, key)) {
                groups.push(BoundaryGroup {
                    arcs: Vec::new(),
                    from,
                    to,
                    w_tilde: state.w_tilde(id),
                    dy_ref: state.dy_at_refresh(id),
                    dy: state.y(to) - state.y(from),
                });
                last = Some((side, key));
            }
            groups.last_mut().expect("pushed above").arcs.push(id);
        }
        ActiveCut {
            members: cut.members().collect(),
            groups,
        }
    }

    /// One toggle. Returns the energy change and the indices of drifted
    /// groups.
    fn toggle(&mut self, state: &mut PotentialState, eta: f64) -> Result<(f64, Vec<usize>)> {
        state.raise_vertices(&self.members, eta);
        let eps = state.epsilon();
        let big_m = state.big_m();
        let mut delta = 0.0;
        let mut drifted = Vec::new();
        for (i, grp) in self.groups.iter_mut().enumerate() {
            let dy = state.y(grp.to) - state.y(grp.from);
            if dy > big_m {
                return Err(FlowError::EnergyHorizon { spread: dy, big_m });
            }
            delta += grp.arcs.len() as f64 * weight_integral(dy, grp.dy);
            grp.dy = dy;
            if grp.w_tilde * (dy - grp.dy_ref).abs() >= eps {
                drifted.push(i);
            }
        }
        Ok((delta, drifted))
    }

    /// Refreshes every arc of group `i`; the group stays a group.
    fn refresh<F>(
        &mut self,
        i: usize,
        state: &mut PotentialState,
        graph: &DirectedMultigraph,
        on_change: &mut F,
    ) -> Result<usize>
    where
        F: FnMut(&WeightChange) -> Result<()>,
    {
        let grp = &mut self.groups[i];
        for &arc in &grp.arcs {
            let change = state.refresh_arc(graph, arc)?;
            on_change(&change)?;
        }
        grp.w_tilde = state.w_tilde(grp.arcs[0]);
        grp.dy_ref = state.dy_at_refresh(grp.arcs[0]);
        Ok(grp.arcs.len())
    }

    fn boundary_weight(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.arcs.len() as f64 * g.w_tilde)
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BalanceOutcome {
    pub toggles: usize,
    pub refreshes: usize,
    pub oracle_calls: usize,
    /// Ratio of the last oracle answer; `> -1/(3 alpha)` on success.
    pub final_ratio: f64,
}

/// Toggles cuts of ratio at most `-1/(3 alpha)` until the oracle's minimum
/// ratio exceeds it. A toggled cut is kept across refreshes for as long as
/// its own ratio stays at or below the threshold.
///
/// Each toggle raises the cut by `eta = 1/(16 alpha u)`, records its energy
/// change in `ledger`, and refreshes drifted arcs; every refresh is passed
/// to `on_change`. Fails if the toggle count exceeds what the certified
/// per-toggle energy decrease allows.
pub fn balance_loop<F>(
    state: &mut PotentialState,
    graph: &DirectedMultigraph,
    oracle: &OracleConfig,
    ledger: &mut EnergyLedger,
    mut on_change: F,
) -> Result<BalanceOutcome>
where
    F: FnMut(&WeightChange) -> Result<()>,
{
    let alpha = oracle.alpha;
    let threshold = -1.0 / (3.0 * alpha);
    let floor = toggle_energy_floor(alpha);
    let initial_energy = state.total_energy(graph)?;
    let max_toggles = (initial_energy / floor).ceil() as usize + 1;

    let mut out = BalanceOutcome::default();
    let mut rc = min_ratio_cut(state, graph, oracle, None)?;
    out.oracle_calls += 1;
    while rc.ratio <= threshold {
        let mut active = ActiveCut::new(state, graph, &rc.cut);
        // Any cut at or below the threshold certifies the same per-toggle
        // decrease, so the oracle is consulted again only once this cut
        // recovers.
        while rc.ratio <= threshold {
            let eta = 1.0 / (16.0 * alpha * rc.u_val);
            check_eta(&rc, eta)?;
            loop {
                if out.toggles >= max_toggles {
                    return Err(FlowError::InvariantBreach(format!(
                        "{} toggles exceed the energy budget {initial_energy:.3} / {floor:.6}",
                        out.toggles
                    )));
                }
                let (delta, drifted) = active.toggle(state, eta)?;
                ledger.record_toggle(delta);
                out.toggles += 1;
                if !drifted.is_empty() {
                    for i in drifted {
                        out.refreshes += active.refresh(i, state, graph, &mut on_change)?;
                    }
                    break;
                }
            }
            rc.g_val = state.gradient_cut_value(&rc.cut);
            rc.u_val = active.boundary_weight();
            rc.ratio = rc.g_val / rc.u_val;
        }
        rc = min_ratio_cut(state, graph, oracle, Some(&rc.cut))?;
        out.oracle_calls += 1;
    }
    out.final_ratio = rc.ratio;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_vertex() -> UndirectedInstance {
        UndirectedInstance::new(2, vec![(0, 1, 1.0)], vec![-1.0, 1.0]).unwrap()
    }

    #[test]
    fn floor_at_alpha_one() {
        assert!((toggle_energy_floor(1.0) - TOGGLE_ENERGY_FLOOR).abs() < 1e-15);
        const { assert!(TOGGLE_ENERGY_FLOOR > 1.0 / 256.0) };
        for alpha in [1.5, 2.0, 10.0, 100.0] {
            assert!(toggle_energy_floor(alpha) > 0.0);
        }
    }

    #[test]
    fn lex_order() {
        assert!(lex_less(0b01, 0b11)); // {0} < {0,1}
        assert!(lex_less(0b11, 0b10)); // {0,1} < {1}
        assert!(lex_less(0b01, 0b10)); // {0} < {1}
        assert!(!lex_less(0b10, 0b10));
    }

    #[test]
    fn brute_force_examples() {
        let rc = brute_force_min_ratio_cut(&two_vertex(), 16, ExecMode::Sequential).unwrap();
        assert_eq!(rc.cut.members().collect::<Vec<_>>(), vec![0]);
        assert_eq!(rc.ratio, -1.0);

        let zero =
            UndirectedInstance::new(3, vec![(0, 1, 1.0), (1, 2, 0.5)], vec![0.0; 3]).unwrap();
        let rc = brute_force_min_ratio_cut(&zero, 16, ExecMode::Parallel).unwrap();
        assert_eq!(rc.ratio, 0.0);
        assert_eq!(rc.cut.members().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn brute_force_rejects_misuse() {
        let disconnected = UndirectedInstance::new(3, vec![(0, 1, 1.0)], vec![0.0; 3]).unwrap();
        assert!(matches!(
            brute_force_min_ratio_cut(&disconnected, 16, ExecMode::Sequential),
            Err(FlowError::Disconnected)
        ));
        assert!(matches!(
            brute_force_min_ratio_cut(&two_vertex(), 1, ExecMode::Sequential),
            Err(FlowError::OversizeBruteForce { .. })
        ));
    }

    #[test]
    fn dinkelbach_examples() {
        let t = dinkelbach_trace(&two_vertex(), 1e-12, None).unwrap();
        assert_eq!(t.cut.cut.members().collect::<Vec<_>>(), vec![0]);
        assert_eq!(t.cut.ratio, -1.0);
        assert_eq!(t.iterations, 1);

        let zero =
            UndirectedInstance::new(3, vec![(0, 1, 1.0), (1, 2, 0.5)], vec![0.0; 3]).unwrap();
        let t = dinkelbach_trace(&zero, 1e-12, None).unwrap();
        assert_eq!(t.iterations, 0);
        assert_eq!(t.cut.ratio, 0.0);

        let disconnected =
            UndirectedInstance::new(3, vec![(0, 1, 1.0)], vec![-1.0, 0.0, 1.0]).unwrap();
        assert!(dinkelbach_min_ratio_cut(&disconnected, 1e-12).is_err());
    }

    #[test]
    fn toggle_single_arc_at_threshold() {
        let g = DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1)]).unwrap();
        let mut st = PotentialState::new(&g, 1.0, 16.0).unwrap();
        let rc = min_ratio_cut(&st, &g, &OracleConfig::default(), None).unwrap();
        // cut {1}: g = -1, u = 1
        assert_eq!(rc.cut.members().collect::<Vec<_>>(), vec![1]);
        let single = RatioCut {
            cut: CutSide::from_members(2, [0]).unwrap(),
            g_val: 1.0,
            u_val: 1.0,
            ratio: 1.0,
        };
        let eps = st.epsilon();
        assert_eq!(
            toggle_cut(&mut st, &g, &single, eps).unwrap(),
            vec![ArcId(0)]
        );
        assert!(toggle_cut(&mut st, &g, &single, 1.5).is_err());
        assert!(toggle_cut(&mut st, &g, &single, 0.0).is_err());
    }

    #[test]
    fn cycle_needs_no_toggles() {
        let g = DirectedMultigraph::from_arcs(4, 0, 2, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let mut st = PotentialState::new(&g, 1.0, 256.0).unwrap();
        let mut ledger = EnergyLedger::new(st.total_energy(&g).unwrap(), false);
        let out = balance_loop(&mut st, &g, &OracleConfig::default(), &mut ledger, |_| {
            Ok(())
        })
        .unwrap();
        assert_eq!(out.toggles, 0);
        assert_eq!(out.final_ratio, 0.0);
    }

    #[test]
    fn boundary_ratio_minus_third_keeps_toggling() {
        // u->v twice, v->u once: cut {v} has g = -1, u = 3, ratio exactly -1/3
        let g = DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1), (0, 1), (1, 0)]).unwrap();
        let mut st = PotentialState::new(&g, 1.0, 16.0).unwrap();
        let rc = min_ratio_cut(&st, &g, &OracleConfig::default(), None).unwrap();
        assert_eq!(rc.ratio, -1.0 / 3.0);
        let mut ledger = EnergyLedger::new(st.total_energy(&g).unwrap(), false);
        let mut changes = Vec::new();
        let out = balance_loop(&mut st, &g, &OracleConfig::default(), &mut ledger, |c| {
            changes.push(*c);
            Ok(())
        })
        .unwrap();
        // each toggle moves y(v) by 1/48; drift reaches 1/8 after six
        assert!(
            out.toggles == 6 || out.toggles == 7,
            "toggles = {}",
            out.toggles
        );
        assert!(out.final_ratio > -1.0 / 3.0);
        assert_eq!(changes.len(), out.refreshes);
        assert!(ledger
            .toggle_deltas
            .iter()
            .all(|&d| d <= -TOGGLE_ENERGY_FLOOR));
    }
}
