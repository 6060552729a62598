//! The balanced augmenting-path solver and the hybrid pipeline.
//!
//! After adding the `(t, s)` links and restricting to the strongly connected
//! component of the terminals, each iteration balances the weights, samples
//! the residual graph and augments along an `s`-`t` path of the sample. A
//! full-graph search backs up the sample and certifies maximality when it
//! finds nothing.

use std::time::Instant;

use serde::Serialize;

use crate::balance::{weight_integral, AugmentationEnergy, EnergyLedger, PotentialState};
use crate::dinic::dinic_maxflow;
use crate::error::{FlowError, Result};
use crate::graph::{ArcId, ArcTag, DirectedMultigraph, FlowPath};
use crate::ratio_cut::{balance_loop, toggle_energy_floor, BalanceOutcome, OracleConfig};
use crate::sparsifier::{SparsifierConfig, SparsifierState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dinic,
    Balanced,
    Hybrid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Dinic, Algorithm::Balanced, Algorithm::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dinic => "dinic",
            Algorithm::Balanced => "balanced",
            Algorithm::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dinic" => Ok(Algorithm::Dinic),
            "balanced" => Ok(Algorithm::Balanced),
            "hybrid" => Ok(Algorithm::Hybrid),
            other => Err(FlowError::InvalidParameter(format!(
                "unknown algorithm {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub beta: f64,
    /// Energy horizon; `max(n^4, n m)` over the linked graph when absent.
    pub big_m: Option<f64>,
    pub oracle: OracleConfig,
    pub sparsifier: SparsifierConfig,
    /// Blocking-flow rounds before the balanced phase of
    /// [`hybrid_solve`]; `ceil(sqrt n)` when absent.
    pub hybrid_rounds: Option<usize>,
    /// Aborts once toggles plus augmentations exceed
    /// `factor * (m + n (F + 1))`.
    pub runtime_guard_factor: Option<f64>,
    pub trace_energy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 9.0,
            big_m: None,
            oracle: OracleConfig::default(),
            sparsifier: SparsifierConfig::default(),
            hybrid_rounds: None,
            runtime_guard_factor: None,
            trace_energy: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub augmentations: usize,
    pub toggle_calls: usize,
    pub refreshes: usize,
    pub oracle_calls: usize,
    pub sparsifier_fallbacks: usize,
    pub sparsifier_queries: usize,
    pub sampled_arcs: usize,
    pub dinic_rounds: usize,
    pub dinic_value: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub value: usize,
    /// Arc-disjoint `s`-`t` paths over the input's vertex and arc ids.
    pub paths: Vec<FlowPath>,
    pub stats: SolveStats,
    pub ledger: EnergyLedger,
}

/// Read-only solver state handed to a [`SolverObserver`].
pub struct SolverView<'a> {
    /// The residual graph restricted to the terminals' component.
    pub graph: &'a DirectedMultigraph,
    pub state: &'a PotentialState,
    pub ledger: &'a EnergyLedger,
}

/// Hooks for verification. An error aborts the solve.
pub trait SolverObserver {
    /// After every balance loop.
    fn balanced(&mut self, _view: &SolverView<'_>, _outcome: &BalanceOutcome) -> Result<()> {
        Ok(())
    }

    /// After every augmentation.
    fn augmented(&mut self, _view: &SolverView<'_>, _record: &AugmentationEnergy) -> Result<()> {
        Ok(())
    }
}

impl SolverObserver for () {}

fn validate(cfg: &SolverConfig, input: &DirectedMultigraph) -> Result<f64> {
    let n = input.n();
    if !(cfg.beta >= 1.0) {
        return Err(FlowError::InvalidParameter(format!(
            "beta = {} must be >= 1",
            cfg.beta
        )));
    }
    let big_m = cfg
        .big_m
        .unwrap_or_else(|| PotentialState::default_big_m(n, 2 * input.arc_count()));
    if !(big_m >= n as f64) {
        return Err(FlowError::InvalidParameter(format!(
            "M = {big_m} must be >= n = {n}"
        )));
    }
    Ok(big_m)
}

/// The input's original arcs on a fresh graph, plus the map from new arc ids
/// back to input arc ids.
fn working_copy(input: &DirectedMultigraph) -> (DirectedMultigraph, Vec<ArcId>) {
    let mut g = DirectedMultigraph::new(input.n(), input.s(), input.t())
        .expect("terminals already validated");
    let mut ids = Vec::new();
    for (id, a) in input.arcs().filter(|(_, a)| a.tag == ArcTag::Original) {
        g.add_arc(a.tail, a.head)
            .expect("endpoints already validated");
        ids.push(id);
    }
    (g, ids)
}

fn finish(
    g: &DirectedMultigraph,
    ids: &[ArcId],
    mut stats: SolveStats,
    ledger: EnergyLedger,
    start: Instant,
) -> Result<FlowResult> {
    let mut paths = g.extract_flow_paths()?;
    for p in &mut paths {
        for a in &mut p.arcs {
            *a = ids[a.0];
        }
    }
    if paths.len() != g.flow_value() {
        return Err(FlowError::InvariantBreach(format!(
            "{} paths recovered for flow value {}",
            paths.len(),
            g.flow_value()
        )));
    }
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(FlowResult {
        value: paths.len(),
        paths,
        stats,
        ledger,
    })
}

/// Runs the balanced phase on `g` (with `(t, s)` links) restricted to the
/// terminals' component, then copies the flips back into `g`.
fn balanced_phase<O: SolverObserver>(
    g: &mut DirectedMultigraph,
    cfg: &SolverConfig,
    big_m: f64,
    stats: &mut SolveStats,
    obs: &mut O,
) -> Result<EnergyLedger> {
    let Some(mut restricted) = g.scc_restrict() else {
        return Ok(EnergyLedger::new(0.0, cfg.trace_energy));
    };
    let ledger = augment_loop(&mut restricted.graph, cfg, big_m, stats, obs)?;
    g.absorb_restricted(&restricted);
    Ok(ledger)
}

fn augment_loop<O: SolverObserver>(
    g: &mut DirectedMultigraph,
    cfg: &SolverConfig,
    big_m: f64,
    stats: &mut SolveStats,
    obs: &mut O,
) -> Result<EnergyLedger> {
    let mut state = PotentialState::new(g, cfg.oracle.alpha, big_m)?;
    let mut sp = SparsifierState::new(g.n(), cfg.sparsifier)?;
    for (id, a) in g.arcs() {
        sp.insert_arc(id, a.from(), a.to(), state.w_tilde(id))?;
    }
    let mut ledger = EnergyLedger::new(state.total_energy(g)?, cfg.trace_energy);
    stats.energy_initial = ledger.initial;
    let n = g.n();
    let m = g.arc_count();
    let horizon_term = (n as f64 - 1.0) * (big_m + 1.0).ln();

    // An s-t path in the full residual graph both licenses another round and
    // backs up the sample.
    while let Some(full_path) = g.find_path(true, None) {
        let outcome = balance_loop(&mut state, g, &cfg.oracle, &mut ledger, |c| {
            sp.update_arc(c.arc, c.from, c.to, c.new)
        })?;
        stats.toggle_calls += outcome.toggles;
        stats.refreshes += outcome.refreshes;
        stats.oracle_calls += outcome.oracle_calls;
        obs.balanced(
            &SolverView {
                graph: g,
                state: &state,
                ledger: &ledger,
            },
            &outcome,
        )?;

        let sample = sp.sparsify(cfg.beta)?;
        stats.sparsifier_queries += 1;
        stats.sampled_arcs += sample.arcs.len();
        let path = match g.find_path(true, Some(&sample.mask(g.arc_capacity()))) {
            Some(p) => p,
            None => {
                stats.sparsifier_fallbacks += 1;
                full_path
            }
        };

        let terminal_gap = state.y(g.t()) - state.y(g.s());
        let energy_before = ledger.total;
        let mut delta = 0.0;
        for &a in &path {
            let dy = state.dy_now(g, a);
            if -dy > big_m {
                return Err(FlowError::EnergyHorizon { spread: -dy, big_m });
            }
            delta += weight_integral(-dy, dy);
        }
        g.flip_path(&path)?;
        for &a in &path {
            state.delete_arc(a)?;
            let w = state.insert_arc(g, a);
            let arc = g.arc(a);
            sp.update_arc(a, arc.from(), arc.to(), w)?;
        }
        let record = AugmentationEnergy {
            delta,
            bound: terminal_gap + horizon_term,
            terminal_gap,
            energy_before,
            ts_links: g.ts_link_count(),
        };
        ledger.record_augmentation(record);
        stats.augmentations += 1;
        obs.augmented(
            &SolverView {
                graph: g,
                state: &state,
                ledger: &ledger,
            },
            &record,
        )?;

        if let Some(factor) = cfg.runtime_guard_factor {
            let work = (stats.toggle_calls + stats.augmentations) as u64;
            let limit = (factor * (m + n * (stats.augmentations + 1)) as f64) as u64;
            if work > limit {
                return Err(FlowError::RuntimeGuard { work, limit });
            }
        }
    }
    stats.energy_final = ledger.total;
    Ok(ledger)
}

/// Maximum `s`-`t` flow by balanced sampling.
pub fn solve(input: &DirectedMultigraph, cfg: &SolverConfig) -> Result<FlowResult> {
    solve_observed(input, cfg, &mut ())
}

pub fn solve_observed<O: SolverObserver>(
    input: &DirectedMultigraph,
    cfg: &SolverConfig,
    obs: &mut O,
) -> Result<FlowResult> {
    let start = Instant::now();
    let big_m = validate(cfg, input)?;
    let (mut g, ids) = working_copy(input);
    let mut stats = SolveStats::default();
    if g.s() == g.t() {
        return Err(FlowError::InvalidGraph("source equals sink".into()));
    }
    if g.arc_count() == 0 {
        return finish(
            &g,
            &ids,
            stats,
            EnergyLedger::new(0.0, cfg.trace_energy),
            start,
        );
    }
    g.add_ts_links()?;
    let ledger = balanced_phase(&mut g, cfg, big_m, &mut stats, obs)?;
    finish(&g, &ids, stats, ledger, start)
}

/// `ceil(sqrt n)`.
pub fn default_hybrid_rounds(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    r
}

/// Blocking-flow rounds first, then the balanced solver on the residual with
/// fresh potentials.
pub fn hybrid_solve(input: &DirectedMultigraph, cfg: &SolverConfig) -> Result<FlowResult> {
    hybrid_solve_observed(input, cfg, &mut ())
}

pub fn hybrid_solve_observed<O: SolverObserver>(
    input: &DirectedMultigraph,
    cfg: &SolverConfig,
    obs: &mut O,
) -> Result<FlowResult> {
    let start = Instant::now();
    let big_m = validate(cfg, input)?;
    let (mut g, ids) = working_copy(input);
    let mut stats = SolveStats::default();
    if g.s() == g.t() {
        return Err(FlowError::InvalidGraph("source equals sink".into()));
    }
    if g.arc_count() == 0 {
        return finish(
            &g,
            &ids,
            stats,
            EnergyLedger::new(0.0, cfg.trace_energy),
            start,
        );
    }
    g.add_ts_links()?;
    let rounds = cfg
        .hybrid_rounds
        .unwrap_or_else(|| default_hybrid_rounds(g.n()));
    let run = dinic_maxflow(&mut g, Some(rounds));
    stats.dinic_rounds = run.rounds;
    stats.dinic_value = run.value;
    let ledger = balanced_phase(&mut g, cfg, big_m, &mut stats, obs)?;
    finish(&g, &ids, stats, ledger, start)
}

/// Plain Dinic to completion.
pub fn dinic_solve(input: &DirectedMultigraph) -> Result<FlowResult> {
    let start = Instant::now();
    let (mut g, ids) = working_copy(input);
    if g.s() == g.t() {
        return Err(FlowError::InvalidGraph("source equals sink".into()));
    }
    let run = dinic_maxflow(&mut g, None);
    let stats = SolveStats {
        dinic_rounds: run.rounds,
        dinic_value: run.value,
        ..SolveStats::default()
    };
    finish(&g, &ids, stats, EnergyLedger::default(), start)
}

pub fn run_algorithm(
    algo: Algorithm,
    input: &DirectedMultigraph,
    cfg: &SolverConfig,
) -> Result<FlowResult> {
    match algo {
        Algorithm::Dinic => dinic_solve(input),
        Algorithm::Balanced => solve(input, cfg),
        Algorithm::Hybrid => hybrid_solve(input, cfg),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub toggles_checked: usize,
    pub augmentations_checked: usize,
    pub violations: Vec<String>,
}

impl EnergyAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every recorded event against its bound: toggles decrease the
/// energy by at least the certified floor, augmentations increase it by at
/// most `y(t) - y(s) + (n - 1) ln(M + 1)` (to `tol`), and the `(t, s)` links
/// alone cap the terminal gap at `energy / links`.
pub fn energy_audit(ledger: &EnergyLedger, alpha: f64, tol: f64) -> EnergyAudit {
    let floor = toggle_energy_floor(alpha);
    let mut audit = EnergyAudit::default();
    for (i, &d) in ledger.toggle_deltas.iter().enumerate() {
        audit.toggles_checked += 1;
        if d > -floor {
            audit
                .violations
                .push(format!("toggle {i}: delta {d:e} above -{floor:e}"));
        }
    }
    for (i, a) in ledger.augmentations.iter().enumerate() {
        audit.augmentations_checked += 1;
        if a.delta > a.bound + tol {
            audit.violations.push(format!(
                "augmentation {i}: delta {} exceeds bound {}",
                a.delta, a.bound
            ));
        }
        if a.terminal_gap >= 0.0
            && a.ts_links > 0
            && a.terminal_gap > a.energy_before / a.ts_links as f64 + tol
        {
            audit.violations.push(format!(
                "augmentation {i}: terminal gap {} above energy / links {}",
                a.terminal_gap,
                a.energy_before / a.ts_links as f64
            ));
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disconnected_terminals() {
        let g = DirectedMultigraph::from_arcs(4, 0, 3, &[(0, 1), (2, 3)]).unwrap();
        let r = solve(&g, &SolverConfig::default()).unwrap();
        assert_eq!(r.value, 0);
        assert_eq!(r.stats.augmentations, 0);
        let empty = DirectedMultigraph::new(2, 0, 1).unwrap();
        assert_eq!(solve(&empty, &SolverConfig::default()).unwrap().value, 0);
    }

    #[test]
    fn parallel_terminal_arcs() {
        let g = DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1); 5]).unwrap();
        for algo in Algorithm::ALL {
            let r = run_algorithm(algo, &g, &SolverConfig::default()).unwrap();
            assert_eq!(r.value, 5, "{}", algo.name());
        }
        let r = solve(&g, &SolverConfig::default()).unwrap();
        assert_eq!(r.stats.sparsifier_fallbacks, 0);
    }

    #[test]
    fn diamond_with_cross_arc() {
        let arcs = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];
        let g = DirectedMultigraph::from_arcs(4, 0, 3, &arcs).unwrap();
        let r = solve(&g, &SolverConfig::default()).unwrap();
        assert_eq!(r.value, 2);
        assert!(energy_audit(&r.ledger, 1.0, 1e-6).passed());
        let h = hybrid_solve(&g, &SolverConfig::default()).unwrap();
        assert_eq!(h.value, 2);
        assert_eq!(h.stats.augmentations, 0);
    }

    #[test]
    fn hybrid_rounds() {
        assert_eq!(default_hybrid_rounds(1), 1);
        assert_eq!(default_hybrid_rounds(16), 4);
        assert_eq!(default_hybrid_rounds(17), 5);
    }

    #[test]
    fn rejects_bad_config() {
        let g = DirectedMultigraph::from_arcs(2, 0, 1, &[(0, 1)]).unwrap();
        let cfg = SolverConfig {
            beta: 0.5,
            ..SolverConfig::default()
        };
        assert!(solve(&g, &cfg).is_err());
        let cfg = SolverConfig {
            big_m: Some(1.0),
            ..SolverConfig::default()
        };
        assert!(solve(&g, &cfg).is_err());
    }
}
