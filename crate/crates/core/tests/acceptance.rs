//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run alone with `cargo test -p balflow --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use balflow::audit::{
    gradient_identity_error, random_ratio_instance, random_ugraph, verify_partition, AuditObserver,
};
use balflow::balance::{stability_bounds, weight_of, EnergyLedger, PotentialState};
use balflow::dinic::{dinic_maxflow, max_flow_value};
use balflow::expander::decompose;
use balflow::generate::{fuzz_specs, generate, GenSpec, Model};
use balflow::graph::{ArcId, CutSide, DirectedMultigraph};
use balflow::maxflow::{
    default_hybrid_rounds, dinic_solve, energy_audit, hybrid_solve_observed, run_algorithm,
    solve_observed, Algorithm, FlowResult, SolverConfig,
};
use balflow::par::{self, ExecMode};
use balflow::ratio_cut::{
    brute_force_min_ratio_cut, dinkelbach_min_ratio_cut, min_ratio_cut, toggle_cut, OracleConfig,
    TOGGLE_ENERGY_FLOOR,
};
use balflow::sparsifier::{SparsifierConfig, SparsifierState};

const FUZZ_SEED: u64 = 0xba1f_0001;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Balanced and hybrid results of one fuzz instance, with the audit trail.
struct FuzzRun {
    n: usize,
    balanced: FlowResult,
    hybrid: FlowResult,
    observer: AuditObserver,
}

fn fuzz_run(spec: &GenSpec) -> FuzzRun {
    let g = generate(spec).expect("fuzz spec is feasible");
    let mut cfg = SolverConfig::default();
    cfg.sparsifier.seed = spec.seed;
    let mut observer = AuditObserver::default();
    let balanced =
        solve_observed(&g, &cfg, &mut observer).unwrap_or_else(|e| panic!("{}: {e}", spec.label()));
    let hybrid = hybrid_solve_observed(&g, &cfg, &mut observer)
        .unwrap_or_else(|e| panic!("{}: {e}", spec.label()));
    FuzzRun {
        n: g.n(),
        balanced,
        hybrid,
        observer,
    }
}

fn criterion_1(specs: &[GenSpec]) -> Outcome {
    // Timed on a single thread.
    let start = Instant::now();
    let mut disagreements = Vec::new();
    for spec in specs {
        let g = generate(spec).expect("fuzz spec is feasible");
        let mut cfg = SolverConfig::default();
        cfg.sparsifier.seed = spec.seed;
        let values: Vec<usize> = Algorithm::ALL
            .iter()
            .map(|&a| {
                run_algorithm(a, &g, &cfg)
                    .map(|r| r.value)
                    .unwrap_or(usize::MAX)
            })
            .collect();
        if values.iter().any(|&v| v != values[0]) {
            disagreements.push(format!("{} {values:?}", spec.label()));
        }
    }
    let elapsed = start.elapsed();
    let models: std::collections::HashSet<Model> = specs.iter().map(|s| s.model).collect();
    outcome(
        disagreements.is_empty()
            && elapsed < Duration::from_secs(60)
            && models.len() == 4
            && specs.len() == 500,
        format!(
            "{} instances x 3 algorithms, {} disagreements, {:.1}s single-threaded{}",
            specs.len(),
            disagreements.len(),
            elapsed.as_secs_f64(),
            disagreements
                .first()
                .map(|d| format!(", first: {d}"))
                .unwrap_or_default()
        ),
    )
}

/// Potentials and refreshed weights from random toggles on a random graph.
fn random_weighted_state(rng: &mut ChaCha8Rng, n: usize) -> (DirectedMultigraph, PotentialState) {
    let m = rng.random_range(n..=3 * n);
    let arcs: Vec<(usize, usize)> = (0..m)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let g = DirectedMultigraph::from_arcs(n, 0, n - 1, &arcs).unwrap();
    let mut st = PotentialState::new(&g, 1.0, 1e6).unwrap();
    for _ in 0..rng.random_range(1..40) {
        let bits = rng.random_range(1..(1u64 << n) - 1);
        let cut = CutSide::from_bits(n, bits).unwrap();
        st.raise(&cut, rng.random_range(0.01..2.0));
        for a in st.drifted_arcs(&g) {
            st.refresh_arc(&g, a).unwrap();
        }
    }
    (g, st)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(3..=12);
        let (g, st) = random_weighted_state(&mut rng, n);
        worst = worst.max(gradient_identity_error(&st, &g).unwrap());
    }
    outcome(
        worst <= 1e-9,
        format!("100 instances, max |g(S) - (w~out - w~in)| = {worst:.2e}"),
    )
}

fn criterion_3(small: &[FuzzRun]) -> Outcome {
    let checks: usize = small.iter().map(|r| r.observer.balance_checks).sum();
    let frac = small
        .iter()
        .map(|r| r.observer.min_out_fraction)
        .fold(f64::INFINITY, f64::min);
    let ratio = small
        .iter()
        .map(|r| r.observer.min_ratio)
        .fold(f64::INFINITY, f64::min);
    let violations: usize = small
        .iter()
        .map(|r| {
            r.observer
                .violations
                .iter()
                .filter(|v| v.contains("1/9") || v.contains("-1/3"))
                .count()
        })
        .sum();
    outcome(
        checks > 0 && violations == 0 && frac >= 1.0 / 9.0 - 1e-9 && ratio >= -1.0 / 3.0 - 1e-9,
        format!("{checks} balance exits checked, min out-fraction {frac:.4}, min ratio {ratio:.4}"),
    )
}

fn criterion_4(runs: &[FuzzRun]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad_samples = 0;
    for _ in 0..100_000 {
        let x1: f64 = rng.random_range(-5.0..50.0);
        let delta: f64 = rng.random_range(0.0..0.999);
        let w1 = weight_of(x1);
        let x2 = x1 + rng.random_range(-1.0..=1.0) * delta / w1;
        let (lo, hi) = stability_bounds(w1, delta).unwrap();
        let w2 = weight_of(x2);
        if w2 < lo * (1.0 - 1e-12) || w2 > hi * (1.0 + 1e-12) {
            bad_samples += 1;
        }
    }
    let audits: usize = runs.iter().map(|r| r.observer.sandwich_checks).sum();
    let breaches: usize = runs
        .iter()
        .map(|r| {
            r.observer
                .violations
                .iter()
                .filter(|v| v.contains("sandwich"))
                .count()
        })
        .sum();
    outcome(
        bad_samples == 0 && breaches == 0 && audits > 0,
        format!("1e5 samples, {bad_samples} outside; {audits} audit points, {breaches} arcs outside the sandwich"),
    )
}

/// Independent per-toggle energy check: oracle, toggle, refresh, and the
/// total energy recomputed from scratch around every toggle.
fn recomputed_toggle_deltas(target: usize) -> Vec<f64> {
    let oracle = OracleConfig::default();
    let mut deltas = Vec::new();
    let mut round = 0;
    while deltas.len() < target {
        round += 1;
        for spec in fuzz_specs(40, 5 + round, 14, 80) {
            let mut g = generate(&spec).expect("fuzz spec is feasible");
            g.add_ts_links().unwrap();
            let Some(r) = g.scc_restrict() else { continue };
            let g = r.graph;
            let mut st =
                PotentialState::new(&g, 1.0, PotentialState::default_big_m(g.n(), g.arc_count()))
                    .unwrap();
            for _ in 0..2_000 {
                let rc = min_ratio_cut(&st, &g, &oracle, None).unwrap();
                if rc.ratio > -1.0 / 3.0 {
                    break;
                }
                let before = st.total_energy(&g).unwrap();
                let drifted = toggle_cut(&mut st, &g, &rc, 1.0 / (16.0 * rc.u_val)).unwrap();
                deltas.push(st.total_energy(&g).unwrap() - before);
                for a in drifted {
                    st.refresh_arc(&g, a).unwrap();
                }
            }
        }
    }
    deltas
}

fn criterion_5(runs: &[FuzzRun]) -> Outcome {
    let recomputed = recomputed_toggle_deltas(10_000);
    let ledgers: Vec<&EnergyLedger> = runs
        .iter()
        .flat_map(|r| [&r.balanced.ledger, &r.hybrid.ledger])
        .collect();
    let solver: Vec<f64> = ledgers
        .iter()
        .flat_map(|l| l.toggle_deltas.iter().copied())
        .collect();
    let all = recomputed.iter().chain(&solver);
    let (mut count, mut nonneg, mut below, mut smallest) = (0, 0, 0, f64::INFINITY);
    for &d in all {
        count += 1;
        if d >= 0.0 {
            nonneg += 1;
        }
        if -d < TOGGLE_ENERGY_FLOOR {
            below += 1;
        }
        smallest = smallest.min(-d);
    }
    outcome(
        count >= 10_000 && nonneg == 0 && below == 0,
        format!(
            "{count} toggles ({} recomputed, {} in solves), smallest decrease {smallest:.5} vs floor {TOGGLE_ENERGY_FLOOR:.5}",
            recomputed.len(),
            solver.len()
        ),
    )
}

fn criterion_6(runs: &[FuzzRun]) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut tightest = f64::NEG_INFINITY;
    for r in runs {
        for res in [&r.balanced, &r.hybrid] {
            let audit = energy_audit(&res.ledger, 1.0, 1e-6);
            checked += audit.augmentations_checked;
            bad.extend(
                audit
                    .violations
                    .into_iter()
                    .filter(|v| v.starts_with("augmentation")),
            );
            for a in &res.ledger.augmentations {
                tightest = tightest.max(a.delta - a.bound);
            }
        }
    }
    outcome(
        checked > 0 && bad.is_empty(),
        format!(
            "{checked} augmentations, max delta - bound = {tightest:.3}, {} violations",
            bad.len()
        ),
    )
}

fn criterion_7(runs: &[FuzzRun]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 1_000;
    let mut cuts_checked = 0;
    let mut worst_miss: f64 = 0.0;
    let (mut sampled, mut offered) = (0usize, 0usize);
    for instance in 0..20 {
        let n = rng.random_range(4..=12);
        let beta = if instance % 2 == 0 { 2.0 } else { 9.0 };
        let m = rng.random_range(n..=4 * n);
        let arcs: Vec<(usize, usize, f64)> = (0..m)
            .map(|_| {
                let u = rng.random_range(0..n);
                let v = (u + rng.random_range(1..n)) % n;
                (u, v, 2f64.powf(rng.random_range(-6.0..0.0)))
            })
            .collect();
        let cfg = SparsifierConfig {
            eager: true,
            seed: rng.random(),
            ..SparsifierConfig::default()
        };
        let mut sp = SparsifierState::new(n, cfg).unwrap();
        for (i, &(u, v, w)) in arcs.iter().enumerate() {
            sp.insert_arc(ArcId(i), u, v, w).unwrap();
        }
        let unbalanced: Vec<Vec<usize>> = (1u64..(1 << n) - 1)
            .filter_map(|mask| {
                let inside = |x: usize| mask >> x & 1 == 1;
                let out: Vec<usize> = (0..m)
                    .filter(|&i| inside(arcs[i].0) && !inside(arcs[i].1))
                    .collect();
                let w_out: f64 = out.iter().map(|&i| arcs[i].2).sum();
                let w_all: f64 = arcs
                    .iter()
                    .filter(|a| inside(a.0) != inside(a.1))
                    .map(|a| a.2)
                    .sum();
                (w_all > 0.0 && w_out >= w_all / beta).then_some(out)
            })
            .collect();
        let mut misses = vec![0usize; unbalanced.len()];
        for _ in 0..trials {
            let sample = sp.sparsify(beta).unwrap();
            sampled += sample.arcs.len();
            offered += m;
            let mask = sample.mask(m);
            for (c, out) in unbalanced.iter().enumerate() {
                if !out.iter().any(|&i| mask[i]) {
                    misses[c] += 1;
                }
            }
        }
        cuts_checked += unbalanced.len();
        worst_miss = misses
            .iter()
            .map(|&x| x as f64 / trials as f64)
            .fold(worst_miss, f64::max);
    }
    let (fallbacks, augs) =
        runs.iter()
            .flat_map(|r| [&r.balanced, &r.hybrid])
            .fold((0, 0), |(f, a), res| {
                (
                    f + res.stats.sparsifier_fallbacks,
                    a + res.stats.augmentations,
                )
            });
    let rate = if augs == 0 {
        0.0
    } else {
        fallbacks as f64 / augs as f64
    };
    outcome(
        worst_miss <= 0.01 && rate <= 0.01,
        format!(
            "{cuts_checked} unbalanced cuts x {trials} samples (mean kept fraction {:.3}), worst miss rate {worst_miss:.4}; fallbacks {fallbacks}/{augs} = {rate:.4}",
            sampled as f64 / offered as f64
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=14);
        let inst = random_ratio_instance(n, &mut rng);
        let brute = brute_force_min_ratio_cut(&inst, 16, ExecMode::Parallel)
            .unwrap()
            .ratio;
        let dink = dinkelbach_min_ratio_cut(&inst, 1e-12).unwrap().ratio;
        worst = worst.max((brute - dink).abs());
    }
    outcome(
        worst <= 1e-7,
        format!("200 instances, max |brute - dinkelbach| = {worst:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let mut graphs: Vec<DirectedMultigraph> = fuzz_specs(25, 9, 60, 600)
        .iter()
        .map(|spec| generate(spec).unwrap())
        .collect();
    // Disjoint s-t chains of lengths 1..=k: one Dinic round per chain, so
    // the longer chains are left for the residual.
    graphs.extend((6..31).map(|k| {
        let mut arcs = Vec::new();
        let mut next = 2;
        for len in 1..=k {
            let mut prev = 0;
            for _ in 1..len {
                arcs.push((prev, next));
                prev = next;
                next += 1;
            }
            arcs.push((prev, 1));
        }
        DirectedMultigraph::from_arcs(next, 0, 1, &arcs).unwrap()
    }));
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0;
    let mut left = 0;
    for mut g in graphs {
        let m = g.arc_count() as f64;
        let n = g.n();
        let total = max_flow_value(&g);
        let pre = dinic_maxflow(&mut g, Some(default_hybrid_rounds(n))).value;
        let residual = dinic_maxflow(&mut g, None).value;
        assert_eq!(pre + residual, total);
        left += usize::from(residual > 0);
        let limit = m / (n as f64).sqrt();
        worst = worst.max(residual as f64 / limit);
        if residual as f64 > limit {
            bad += 1;
        }
    }
    outcome(
        bad == 0,
        format!("50 instances ({left} with flow left), max residual / (m / sqrt n) = {worst:.3}"),
    )
}

fn criterion_10(runs: &[FuzzRun]) -> Outcome {
    let in_range: Vec<&FuzzRun> = runs.iter().filter(|r| r.n <= 50).collect();
    let checks: usize = in_range
        .iter()
        .map(|r| r.observer.connectivity_checks)
        .sum();
    let bad: usize = in_range
        .iter()
        .map(|r| {
            r.observer
                .violations
                .iter()
                .filter(|v| v.contains("strongly connected"))
                .count()
        })
        .sum();
    outcome(
        checks > 0 && bad == 0,
        format!(
            "{} instances with n <= 50, {checks} post-augmentation checks, {bad} failures",
            in_range.len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut clusters = 0;
    let mut violations = Vec::new();
    for i in 0..300 {
        let n = rng.random_range(2..=40);
        let g = random_ugraph(n, &mut rng);
        let phi = rng.random_range(0.02..0.7);
        let p = decompose(&g, phi, ExecMode::Sequential).unwrap();
        clusters += p.clusters.iter().filter(|c| c.len() <= 16).count();
        violations.extend(
            verify_partition(&g, &p)
                .into_iter()
                .map(|v| format!("graph {i}: {v}")),
        );
    }
    // Hierarchies built by the sparsifier on solver-like buckets.
    for seed in 0..40 {
        let spec = GenSpec::new(Model::ALL[seed % 4], 14, 50, seed as u64);
        let g = generate(&spec).unwrap();
        let cfg = SparsifierConfig {
            eager: true,
            ..SparsifierConfig::default()
        };
        let mut sp = SparsifierState::new(g.n(), cfg).unwrap();
        for (id, a) in g.arcs() {
            sp.insert_arc(id, a.from(), a.to(), 1.0).unwrap();
        }
        sp.sparsify(9.0).unwrap();
        for b in sp.buckets() {
            for level in b.levels() {
                if let Some(p) = &level.partition {
                    let edges = level
                        .arcs
                        .iter()
                        .map(|&a| (g.arc(a).from(), g.arc(a).to()))
                        .collect();
                    let padding = level.arcs.len().div_ceil(g.n()).max(1) as u64;
                    let ug = balflow::expander::UGraph::new(g.n(), edges)
                        .unwrap()
                        .add_self_loops(padding);
                    clusters += p.clusters.iter().filter(|c| c.len() <= 16).count();
                    violations.extend(verify_partition(&ug, p));
                }
            }
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{clusters} clusters with <= 16 vertices verified exhaustively, {} violations",
            violations.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let specs = fuzz_specs(500, FUZZ_SEED, 60, 600);
    let runs: Vec<FuzzRun> = par::map(ExecMode::Parallel, &specs, fuzz_run);
    for (spec, r) in specs.iter().zip(&runs) {
        let g = generate(spec).unwrap();
        assert_eq!(
            r.balanced.value,
            dinic_solve(&g).unwrap().value,
            "{}",
            spec.label()
        );
    }
    let small_specs = fuzz_specs(60, FUZZ_SEED ^ 3, 12, 60);
    let small: Vec<FuzzRun> = par::map(ExecMode::Parallel, &small_specs, fuzz_run);

    let results: Vec<(&str, Outcome)> = vec![
        ("oracle equivalence", criterion_1(&specs)),
        ("gradient identity", criterion_2()),
        ("balance postcondition", criterion_3(&small)),
        ("stability and weight sandwich", criterion_4(&runs)),
        ("energy decrease per toggle", criterion_5(&runs)),
        ("energy increase per augmentation", criterion_6(&runs)),
        ("sparsifier guarantee", criterion_7(&runs)),
        ("dinkelbach exactness", criterion_8()),
        ("blocking-flow preprocessing", criterion_9()),
        ("residual strong connectivity", criterion_10(&runs)),
        ("expander certification", criterion_11()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {name}: {}", i + 1, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
