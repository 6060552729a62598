use std::collections::{BTreeMap, BTreeSet};

use balflow::generate::{generate, GenSpec, Model};
use balflow::graph::ArcId;
use balflow::maxflow::{solve, SolverConfig};
use balflow::sparsifier::{
    bucket_index, build_hierarchy, sample_level, SparsifierConfig, SparsifierState,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `floor(log2 w)` by repeated scaling.
fn log2_floor(mut w: f64) -> i32 {
    let mut k = 0;
    while w >= 2.0 {
        w /= 2.0;
        k += 1;
    }
    while w < 1.0 {
        w *= 2.0;
        k -= 1;
    }
    k
}

#[derive(Clone, Debug)]
enum Op {
    Insert(usize, usize, f64),
    Delete(usize),
    Update(usize, usize, usize, f64),
}

fn ops_strategy(n: usize) -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        3 => (0..n, 0..n, -20.0f64..0.0).prop_map(|(u, v, e)| Op::Insert(u, v, e.exp2())),
        1 => any::<usize>().prop_map(Op::Delete),
        2 => (any::<usize>(), 0..n, 0..n, -20.0f64..0.0).prop_map(|(i, u, v, e)| Op::Update(i, u, v, e.exp2())),
    ];
    prop::collection::vec(op, 1000)
}

proptest! {
    #[test]
    fn bucket_index_is_log2_floor(e in -1000.0f64..1000.0) {
        let w = e.exp2();
        prop_assert_eq!(bucket_index(w).unwrap(), log2_floor(w));
    }

    #[test]
    fn buckets_match_from_scratch(ops in ops_strategy(10), seed in any::<u64>()) {
        let n = 10;
        let cfg = SparsifierConfig { seed, ..SparsifierConfig::default() };
        let mut sp = SparsifierState::new(n, cfg).unwrap();
        let mut live: BTreeMap<ArcId, (usize, usize, f64)> = BTreeMap::new();
        let mut next = 0;
        for (step, op) in ops.into_iter().enumerate() {
            match op {
                Op::Insert(u, v, w) => {
                    sp.insert_arc(ArcId(next), u, v, w).unwrap();
                    live.insert(ArcId(next), (u, v, w));
                    next += 1;
                }
                Op::Delete(i) if !live.is_empty() => {
                    let id = *live.keys().nth(i % live.len()).unwrap();
                    sp.delete_arc(id).unwrap();
                    live.remove(&id);
                }
                Op::Update(i, u, v, w) if !live.is_empty() => {
                    let id = *live.keys().nth(i % live.len()).unwrap();
                    sp.update_arc(id, u, v, w).unwrap();
                    live.insert(id, (u, v, w));
                }
                _ => {}
            }
            if step % 97 == 0 {
                let sample = sp.sparsify(2.0).unwrap();
                prop_assert!(sample.arcs.iter().all(|a| live.contains_key(a)));
                prop_assert!(sample.arcs.windows(2).all(|w| w[0] < w[1]));
            }
        }

        let mut want: BTreeMap<i32, BTreeMap<ArcId, (usize, usize)>> = BTreeMap::new();
        for (&id, &(u, v, w)) in &live {
            want.entry(log2_floor(w)).or_default().insert(id, (u, v));
        }
        prop_assert_eq!(sp.len(), live.len());
        let got: Vec<i32> = sp.buckets().map(|b| b.index).collect();
        prop_assert_eq!(got, want.keys().copied().collect::<Vec<_>>());
        for (&index, arcs) in &want {
            sp.rebuild_bucket(index).unwrap();
            let b = sp.bucket(index).unwrap();
            prop_assert_eq!(b.arcs().collect::<Vec<_>>(), arcs.keys().copied().collect::<Vec<_>>());
            // The hierarchy splits the bucket into disjoint intra sets.
            let mut union = BTreeSet::new();
            for level in b.levels() {
                for &a in &level.intra {
                    prop_assert!(union.insert(a), "arc {:?} on two levels", a);
                }
            }
            prop_assert_eq!(union.into_iter().collect::<Vec<_>>(), arcs.keys().copied().collect::<Vec<_>>());
            let fresh = build_hierarchy(n, arcs, &cfg).unwrap();
            prop_assert_eq!(b.levels(), fresh.as_slice());
        }
    }
}

#[test]
fn sample_level_inclusion_frequencies() {
    let intra: Vec<ArcId> = (0..10).map(ArcId).collect();
    let p = 0.3;
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut hits = [0u32; 10];
    let mut sizes = 0u64;
    for _ in 0..trials {
        let s = sample_level(&intra, p, &mut rng);
        sizes += s.len() as u64;
        for a in s {
            hits[a.0] += 1;
        }
    }
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    for (i, &h) in hits.iter().enumerate() {
        let dev = (h as f64 - trials as f64 * p).abs();
        assert!(
            dev <= 4.0 * sigma,
            "arc {i}: {h} hits, deviation {dev:.1} > 4 sigma {sigma:.1}"
        );
    }
    let mean = sizes as f64 / trials as f64;
    assert!((mean - 3.0).abs() <= 4.0 * (10.0 * p * (1.0 - p) / trials as f64).sqrt());
    assert_eq!(sample_level(&intra, 1.0, &mut rng), intra);
    assert!(sample_level(&intra, 0.0, &mut rng).is_empty());
}

/// With a small forced quality the levels are genuinely subsampled; each arc
/// of a rebuilt, unchanged bucket then appears with its level's probability.
#[test]
fn forced_low_quality_samples_at_level_rate() {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = SparsifierConfig {
        quality_override: Some(0.5),
        seed: 11,
        ..SparsifierConfig::default()
    };
    let mut sp = SparsifierState::new(n, cfg).unwrap();
    let mut m = 0;
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.random_bool(0.4) {
                sp.insert_arc(ArcId(m), u, v, 0.75).unwrap();
                m += 1;
            }
        }
    }
    let beta = 9.0;
    let first = sp.sparsify(beta).unwrap();
    assert_eq!(first.stats.rebuilds, 1);
    assert_eq!(first.stats.bypassed, 0);
    let b = sp.bucket(-1).unwrap();
    let t = b.levels().len() as f64;
    let mut expected = vec![0.0; m];
    for level in b.levels() {
        let p = if level.residue {
            1.0
        } else {
            (0.5 * 2.0 * beta / (2.0 * t) * n as f64 / level.arcs.len() as f64).min(1.0)
        };
        for a in &level.intra {
            expected[a.0] = p;
        }
    }
    assert!(
        expected.iter().any(|&p| p < 0.5),
        "level 0 should be subsampled"
    );

    let trials = 2_000;
    let mut hits = vec![0u32; m];
    for _ in 0..trials {
        let s = sp.sparsify(beta).unwrap();
        assert_eq!(s.stats.rebuilds, 0);
        for a in s.arcs {
            hits[a.0] += 1;
        }
    }
    for (a, (&h, &p)) in hits.iter().zip(&expected).enumerate() {
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt().max(1e-9);
        let dev = (h as f64 - trials as f64 * p).abs();
        assert!(dev <= 5.0 * sigma, "arc {a}: {h} hits vs p = {p:.3}");
    }
}

#[test]
fn queries_are_reproducible() {
    let build = || {
        let mut sp = SparsifierState::new(
            12,
            SparsifierConfig {
                quality_override: Some(0.3),
                seed: 5,
                ..SparsifierConfig::default()
            },
        )
        .unwrap();
        let mut id = 0;
        for u in 0..12 {
            for v in 0..12 {
                if u != v {
                    sp.insert_arc(ArcId(id), u, v, 0.3).unwrap();
                    id += 1;
                }
            }
        }
        sp
    };
    let (mut a, mut b) = (build(), build());
    for _ in 0..5 {
        let (x, y) = (a.sparsify(3.0).unwrap(), b.sparsify(3.0).unwrap());
        assert_eq!((x.arcs, x.stats), (y.arcs, y.stats));
    }
}

/// The single forward arc of the planted cut is the only way from `s` to
/// `t`, so a solve without fallbacks found it in the very first sample.
#[test]
fn planted_forward_arc_is_sampled_first() {
    for seed in 0..10 {
        let spec = GenSpec {
            k: Some(50),
            ..GenSpec::new(Model::UnbalancedCut, 20, 150, seed)
        };
        let g = generate(&spec).unwrap();
        let mut cfg = SolverConfig::default();
        cfg.sparsifier.seed = seed;
        cfg.sparsifier.eager = true;
        let r = solve(&g, &cfg).unwrap();
        assert_eq!(r.value, 1);
        assert_eq!(r.stats.sparsifier_fallbacks, 0, "seed {seed}");
        assert_eq!(r.stats.sparsifier_queries, 1);
    }
}
