//! Brute-force checks on small instances. Everything here enumerates all
//! `2^n - 2` cuts and is meant for `n <= 20`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::balance::{AugmentationEnergy, PotentialState};
use crate::error::{FlowError, Result};
use crate::expander::{decompose, exact_min_conductance, Partition, UGraph, EXACT_LIMIT};
use crate::generate::{fuzz_specs, generate};
use crate::graph::{ArcTag, DirectedMultigraph};
use crate::maxflow::{
    dinic_solve, energy_audit, hybrid_solve_observed, solve_observed, SolverConfig, SolverObserver,
    SolverView,
};
use crate::par::{self, ExecMode};
use crate::ratio_cut::{
    brute_force_min_ratio_cut, dinkelbach_min_ratio_cut, BalanceOutcome, UndirectedInstance,
};

pub const MAX_AUDIT_N: usize = 20;

fn check_size(n: usize) -> Result<()> {
    if !(2..=MAX_AUDIT_N).contains(&n) {
        return Err(FlowError::OversizeBruteForce {
            n,
            max: MAX_AUDIT_N,
        });
    }
    Ok(())
}

/// `(w~(out), w~(in))` of every proper cut, indexed by bitmask.
fn boundary_table(state: &PotentialState, graph: &DirectedMultigraph) -> Result<Vec<(f64, f64)>> {
    let n = graph.n();
    check_size(n)?;
    let arcs: Vec<(usize, usize, f64)> = graph
        .arcs()
        .map(|(id, a)| (a.from(), a.to(), state.w_tilde(id)))
        .collect();
    Ok((0u64..1 << n)
        .map(|mask| {
            let mut out = 0.0;
            let mut inn = 0.0;
            for &(u, v, w) in &arcs {
                match (mask >> u & 1 == 1, mask >> v & 1 == 1) {
                    (true, false) => out += w,
                    (false, true) => inn += w,
                    _ => {}
                }
            }
            (out, inn)
        })
        .collect())
}

/// Largest `|g(S) - (w~(out S) - w~(in S))|` over all proper cuts.
pub fn gradient_identity_error(state: &PotentialState, graph: &DirectedMultigraph) -> Result<f64> {
    let table = boundary_table(state, graph)?;
    let n = graph.n();
    let g = state.gradient();
    let full = (1u64 << n) - 1;
    Ok((1..full)
        .map(|mask| {
            let gs: f64 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| g[v]).sum();
            let (out, inn) = table[mask as usize];
            (gs - (out - inn)).abs()
        })
        .fold(0.0, f64::max))
}

/// Smallest `w~(out S) / w~(boundary S)` over cuts with nonzero boundary.
pub fn min_out_fraction(state: &PotentialState, graph: &DirectedMultigraph) -> Result<f64> {
    let table = boundary_table(state, graph)?;
    let full = (1u64 << graph.n()) - 1;
    Ok((1..full)
        .filter_map(|mask| {
            let (out, inn) = table[mask as usize];
            (out + inn > 0.0).then(|| out / (out + inn))
        })
        .fold(f64::INFINITY, f64::min))
}

/// Exact minimum of `g(S) / w~(boundary S)`.
pub fn brute_min_ratio(state: &PotentialState, graph: &DirectedMultigraph) -> Result<f64> {
    let inst = UndirectedInstance::from_state(state, graph);
    Ok(brute_force_min_ratio_cut(&inst, MAX_AUDIT_N, ExecMode::Sequential)?.ratio)
}

/// Maximum flow as the minimum number of original arcs leaving a cut that
/// holds `s` but not `t`.
pub fn max_flow_by_cuts(g: &DirectedMultigraph) -> Result<usize> {
    let n = g.n();
    check_size(n)?;
    let arcs: Vec<(usize, usize)> = g
        .arcs()
        .filter(|(_, a)| a.tag == ArcTag::Original)
        .map(|(_, a)| (a.tail, a.head))
        .collect();
    let (s, t) = (g.s(), g.t());
    Ok((0u64..1 << n)
        .filter(|mask| mask >> s & 1 == 1 && mask >> t & 1 == 0)
        .map(|mask| {
            arcs.iter()
                .filter(|&&(u, v)| mask >> u & 1 == 1 && mask >> v & 1 == 0)
                .count()
        })
        .min()
        .unwrap_or(0))
}

/// Partition checks: disjoint cover, boundary equal to the recomputed
/// inter-cluster edge set, and exhaustive conductance of every cluster of at
/// most [`EXACT_LIMIT`] vertices against `phi / slack`.
pub fn verify_partition(g: &UGraph, p: &Partition) -> Vec<String> {
    let mut bad = Vec::new();
    let mut owner = vec![usize::MAX; g.n()];
    for (c, members) in p.clusters.iter().enumerate() {
        for &v in members {
            if owner[v] != usize::MAX {
                bad.push(format!("vertex {v} in clusters {} and {c}", owner[v]));
            }
            owner[v] = c;
            if p.cluster_of[v] != c {
                bad.push(format!(
                    "cluster_of[{v}] = {} but listed in {c}",
                    p.cluster_of[v]
                ));
            }
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        bad.push(format!("vertex {v} not covered"));
    }
    let mut boundary = p.boundary.clone();
    boundary.sort_unstable();
    if boundary != p.recompute_boundary(g) {
        bad.push("boundary differs from recomputed inter-cluster edges".into());
    }
    let need = p.phi / p.slack;
    for c in 0..p.clusters.len() {
        let k = p.clusters[c].len();
        if !(2..=EXACT_LIMIT).contains(&k) {
            continue;
        }
        let sub = p.cluster_graph(g, c);
        match exact_min_conductance(&sub) {
            Ok((phi, _)) if phi + 1e-12 < need => bad.push(format!(
                "cluster {c}: conductance {phi} below phi/slack {need}"
            )),
            Ok(_) => {}
            Err(e) => bad.push(format!("cluster {c}: {e}")),
        }
    }
    bad
}

/// Observer that runs the brute-force invariant checks during a solve.
#[derive(Clone, Debug)]
pub struct AuditObserver {
    /// Cut enumeration only below this many vertices.
    pub max_cut_n: usize,
    /// Strong-connectivity checks only below this many vertices.
    pub max_scc_n: usize,
    pub tol: f64,
    pub balance_checks: usize,
    pub connectivity_checks: usize,
    pub sandwich_checks: usize,
    pub min_out_fraction: f64,
    pub min_ratio: f64,
    pub max_gradient_error: f64,
    pub violations: Vec<String>,
}

impl Default for AuditObserver {
    fn default() -> Self {
        AuditObserver {
            max_cut_n: 12,
            max_scc_n: 50,
            tol: 1e-9,
            balance_checks: 0,
            connectivity_checks: 0,
            sandwich_checks: 0,
            min_out_fraction: f64::INFINITY,
            min_ratio: f64::INFINITY,
            max_gradient_error: 0.0,
            violations: Vec::new(),
        }
    }
}

impl AuditObserver {
    fn sandwich(&mut self, view: &SolverView<'_>, when: &str) {
        self.sandwich_checks += 1;
        if let Some(a) = view.state.sandwich_violation(view.graph) {
            self.violations
                .push(format!("{when}: arc {} outside the weight sandwich", a.0));
        }
    }
}

impl SolverObserver for AuditObserver {
    fn balanced(&mut self, view: &SolverView<'_>, _outcome: &BalanceOutcome) -> Result<()> {
        self.sandwich(view, "after balance");
        if view.graph.n() > self.max_cut_n {
            return Ok(());
        }
        self.balance_checks += 1;
        let frac = min_out_fraction(view.state, view.graph)?;
        let ratio = brute_min_ratio(view.state, view.graph)?;
        let grad = gradient_identity_error(view.state, view.graph)?;
        self.min_out_fraction = self.min_out_fraction.min(frac);
        self.min_ratio = self.min_ratio.min(ratio);
        self.max_gradient_error = self.max_gradient_error.max(grad);
        if frac < 1.0 / 9.0 - self.tol {
            self.violations
                .push(format!("out-fraction {frac} below 1/9"));
        }
        if ratio < -1.0 / 3.0 - self.tol {
            self.violations
                .push(format!("min ratio {ratio} below -1/3"));
        }
        if grad > self.tol {
            self.violations
                .push(format!("gradient identity off by {grad}"));
        }
        Ok(())
    }

    fn augmented(&mut self, view: &SolverView<'_>, _record: &AugmentationEnergy) -> Result<()> {
        self.sandwich(view, "after augmentation");
        if view.graph.n() <= self.max_scc_n && view.graph.find_path(true, None).is_some() {
            self.connectivity_checks += 1;
            if !view.graph.is_strongly_connected() {
                self.violations
                    .push("residual graph not strongly connected while a path remains".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub checked: usize,
    pub violations: Vec<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

struct InstanceAudit {
    label: String,
    flow_errors: Vec<String>,
    observer: AuditObserver,
    energy: Vec<String>,
    toggles: usize,
    augmentations: usize,
}

fn audit_instance(spec: &crate::generate::GenSpec, cfg: &SolverConfig) -> Result<InstanceAudit> {
    let g = generate(spec)?;
    let label = spec.label();
    let truth = max_flow_by_cuts(&g)?;
    let mut observer = AuditObserver::default();
    let mut flow_errors = Vec::new();
    let mut energy = Vec::new();
    let (mut toggles, mut augmentations) = (0, 0);
    let dinic = dinic_solve(&g)?.value;
    if dinic != truth {
        flow_errors.push(format!("{label}: dinic {dinic} vs cut enumeration {truth}"));
    }
    for (name, res) in [
        ("balanced", solve_observed(&g, cfg, &mut observer)),
        ("hybrid", hybrid_solve_observed(&g, cfg, &mut observer)),
    ] {
        match res {
            Ok(r) => {
                if r.value != truth {
                    flow_errors.push(format!(
                        "{label}: {name} {} vs cut enumeration {truth}",
                        r.value
                    ));
                }
                let a = energy_audit(&r.ledger, cfg.oracle.alpha, 1e-6);
                toggles += a.toggles_checked;
                augmentations += a.augmentations_checked;
                energy.extend(
                    a.violations
                        .into_iter()
                        .map(|v| format!("{label} {name}: {v}")),
                );
            }
            Err(e) => flow_errors.push(format!("{label}: {name} failed: {e}")),
        }
    }
    Ok(InstanceAudit {
        label,
        flow_errors,
        observer,
        energy,
        toggles,
        augmentations,
    })
}

/// The brute-force suite behind `balflow verify`: random instances with at
/// most 12 vertices, solved by every algorithm under the audit observer,
/// plus oracle and decomposition cross-checks.
pub fn run_verify(
    count: usize,
    seed: u64,
    cfg: &SolverConfig,
    exec: ExecMode,
) -> Result<VerifyReport> {
    let specs = fuzz_specs(count, seed, 12, 60);
    let audits: Vec<Result<InstanceAudit>> = par::map(exec, &specs, |s| audit_instance(s, cfg));
    let mut flow = CheckResult::named("max-flow-value");
    let mut postcondition = CheckResult::named("balance-postcondition");
    let mut gradient = CheckResult::named("gradient-identity");
    let mut sandwich = CheckResult::named("weight-sandwich");
    let mut connectivity = CheckResult::named("strong-connectivity");
    let mut energy = CheckResult::named("energy-bounds");
    for a in audits {
        let a = a?;
        flow.checked += 3;
        flow.violations.extend(a.flow_errors);
        let o = &a.observer;
        postcondition.checked += o.balance_checks;
        gradient.checked += o.balance_checks;
        sandwich.checked += o.sandwich_checks;
        connectivity.checked += o.connectivity_checks;
        for v in &o.violations {
            let target = if v.contains("gradient") {
                &mut gradient
            } else if v.contains("sandwich") {
                &mut sandwich
            } else if v.contains("connected") {
                &mut connectivity
            } else {
                &mut postcondition
            };
            target.violations.push(format!("{}: {v}", a.label));
        }
        energy.checked += a.toggles + a.augmentations;
        energy.violations.extend(a.energy);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0dd_ba11);
    let mut oracle = CheckResult::named("dinkelbach-exactness");
    let mut expander = CheckResult::named("expander-certification");
    for i in 0..count {
        let n = rng.random_range(3..=12);
        let inst = random_ratio_instance(n, &mut rng);
        let brute = brute_force_min_ratio_cut(&inst, 16, ExecMode::Sequential)?.ratio;
        let dink = dinkelbach_min_ratio_cut(&inst, 1e-12)?.ratio;
        oracle.checked += 1;
        if (brute - dink).abs() > 1e-7 {
            oracle
                .violations
                .push(format!("instance {i}: brute {brute} vs dinkelbach {dink}"));
        }
        let ug = random_ugraph(rng.random_range(2..=16), &mut rng);
        let p = decompose(&ug, rng.random_range(0.05..0.6), ExecMode::Sequential)?;
        expander.checked += p.clusters.len();
        expander.violations.extend(
            verify_partition(&ug, &p)
                .into_iter()
                .map(|v| format!("graph {i}: {v}")),
        );
    }
    Ok(VerifyReport {
        instances: count,
        seed,
        checks: vec![
            flow,
            gradient,
            postcondition,
            sandwich,
            connectivity,
            energy,
            oracle,
            expander,
        ],
    })
}

impl CheckResult {
    fn named(name: &str) -> Self {
        CheckResult {
            name: name.into(),
            checked: 0,
            violations: Vec::new(),
        }
    }
}

/// Connected instance: a random spanning tree plus extra edges, weights in
/// `(0, 1]`, and a gradient summing to zero.
pub fn random_ratio_instance<R: Rng>(n: usize, rng: &mut R) -> UndirectedInstance {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v, 1.0 - rng.random::<f64>()));
    }
    for _ in 0..rng.random_range(0..=n * 2) {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v {
            edges.push((u, v, 1.0 - rng.random::<f64>()));
        }
    }
    let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = g.iter().sum::<f64>() / n as f64;
    g.iter_mut().for_each(|x| *x -= mean);
    UndirectedInstance::new(n, edges, g).expect("generated instance is valid")
}

/// Random multigraph with occasional loops and padding.
pub fn random_ugraph<R: Rng>(n: usize, rng: &mut R) -> UGraph {
    let m = rng.random_range(0..=n * 3);
    let edges = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    UGraph::new(n, edges)
        .expect("endpoints in range")
        .add_self_loops(rng.random_range(0..3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_enumeration_matches_dinic() {
        let g = DirectedMultigraph::from_arcs(4, 0, 3, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2)])
            .unwrap();
        assert_eq!(max_flow_by_cuts(&g).unwrap(), 2);
    }

    #[test]
    fn small_verify_run_passes() {
        let r = run_verify(8, 3, &SolverConfig::default(), ExecMode::Sequential).unwrap();
        for c in &r.checks {
            assert!(c.passed(), "{}: {:?}", c.name, c.violations);
        }
    }
}
