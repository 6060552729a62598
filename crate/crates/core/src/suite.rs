//! Cross-algorithm experiment runs with machine-readable reports.

use serde::Serialize;

use crate::error::Result;
use crate::generate::{generate, GenSpec};
use crate::graph::DirectedMultigraph;
use crate::maxflow::{run_algorithm, Algorithm, SolveStats, SolverConfig};
use crate::par::{self, ExecMode};

pub const SCHEMA_VERSION: u32 = 1;

/// A named instance, generated or loaded.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub graph: DirectedMultigraph,
    pub seed: u64,
}

impl Instance {
    pub fn generated(spec: &GenSpec) -> Result<Self> {
        Ok(Instance {
            name: spec.label(),
            graph: generate(spec)?,
            seed: spec.seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub schema_version: u32,
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub algo: Algorithm,
    pub value: Option<usize>,
    pub augmentations: usize,
    pub toggle_calls: usize,
    pub refreshes: usize,
    pub oracle_calls: usize,
    pub sparsifier_fallbacks: usize,
    pub dinic_rounds: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    /// Every algorithm on this instance returned the same value.
    pub agree: bool,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub rows: Vec<SuiteRow>,
    pub failed_rows: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failed_rows == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "schema_version,instance,n,m,algo,value,augmentations,toggle_calls,refreshes,oracle_calls,\
             sparsifier_fallbacks,dinic_rounds,energy_initial,energy_final,wall_ms,agree,failed\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{:.9},{:.9},{},{},{}\n",
                r.schema_version,
                r.instance,
                r.n,
                r.m,
                r.algo.name(),
                r.value.map(|v| v.to_string()).unwrap_or_default(),
                r.augmentations,
                r.toggle_calls,
                r.refreshes,
                r.oracle_calls,
                r.sparsifier_fallbacks,
                r.dinic_rounds,
                r.energy_initial,
                r.energy_final,
                r.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default(),
                r.agree,
                r.failed
            ));
        }
        out
    }

    /// Totals over the balanced and hybrid rows.
    pub fn fallback_rate(&self) -> f64 {
        let (fallbacks, augs) = self
            .rows
            .iter()
            .filter(|r| r.algo != Algorithm::Dinic)
            .fold((0, 0), |(f, a), r| {
                (f + r.sparsifier_fallbacks, a + r.augmentations)
            });
        if augs == 0 {
            0.0
        } else {
            fallbacks as f64 / augs as f64
        }
    }
}

fn row(
    inst: &Instance,
    algo: Algorithm,
    res: &Result<crate::maxflow::FlowResult>,
    timing: bool,
) -> SuiteRow {
    let stats = res
        .as_ref()
        .map(|r| r.stats)
        .unwrap_or_else(|_| SolveStats::default());
    SuiteRow {
        schema_version: SCHEMA_VERSION,
        instance: inst.name.clone(),
        n: inst.graph.n(),
        m: inst.graph.original_arc_count(),
        algo,
        value: res.as_ref().ok().map(|r| r.value),
        augmentations: stats.augmentations,
        toggle_calls: stats.toggle_calls,
        refreshes: stats.refreshes,
        oracle_calls: stats.oracle_calls,
        sparsifier_fallbacks: stats.sparsifier_fallbacks,
        dinic_rounds: stats.dinic_rounds,
        energy_initial: stats.energy_initial,
        energy_final: stats.energy_final,
        wall_ms: timing.then_some(stats.wall_ms),
        agree: true,
        failed: false,
        error: res.as_ref().err().map(|e| e.to_string()),
    }
}

/// Runs every algorithm on every instance; instances run concurrently under
/// `exec`. The sparsifier seed of each run is the configured seed mixed with
/// the instance seed. Wall times are reported only when `timing` is set, so
/// that untimed reports are byte-identical across runs.
pub fn run_suite(
    instances: &[Instance],
    algos: &[Algorithm],
    cfg: &SolverConfig,
    exec: ExecMode,
    timing: bool,
) -> SuiteReport {
    let per_instance = par::map(exec, instances, |inst| {
        let mut local = *cfg;
        local.sparsifier.seed = cfg.sparsifier.seed ^ inst.seed.rotate_left(17);
        let mut rows: Vec<SuiteRow> = algos
            .iter()
            .map(|&algo| {
                row(
                    inst,
                    algo,
                    &run_algorithm(algo, &inst.graph, &local),
                    timing,
                )
            })
            .collect();
        let first = rows.first().and_then(|r| r.value);
        let agree = rows.iter().all(|r| r.value.is_some() && r.value == first);
        for r in &mut rows {
            r.agree = agree;
            r.failed = !agree || r.error.is_some();
        }
        rows
    });
    let rows: Vec<SuiteRow> = per_instance.into_iter().flatten().collect();
    SuiteReport {
        schema_version: SCHEMA_VERSION,
        failed_rows: rows.iter().filter(|r| r.failed).count(),
        rows,
    }
}
