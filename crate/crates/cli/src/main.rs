use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use balflow::audit::run_verify;
use balflow::dimacs::{read_dimacs, write_dimacs};
use balflow::generate::{fuzz_specs, generate, GenSpec, Model};
use balflow::maxflow::{run_algorithm, Algorithm, SolverConfig};
use balflow::par::ExecMode;
use balflow::ratio_cut::OracleMethod;
use balflow::suite::{run_suite, Instance};
use balflow::FlowError;

/// Exit status for invariant breaches and cross-algorithm disagreement.
const EXIT_BREACH: u8 = 2;

#[derive(Parser)]
#[command(name = "balflow", version, about = "Balanced augmenting-path max flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one DIMACS instance.
    Solve(SolveArgs),
    /// Write a generated instance in DIMACS format.
    Gen(GenArgs),
    /// Run every algorithm on a batch of instances and report agreement.
    Bench(BenchArgs),
    /// Run the brute-force invariant suites on small random instances.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Dinic,
    Balanced,
    Hybrid,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Dinic => Algorithm::Dinic,
            AlgoArg::Balanced => Algorithm::Balanced,
            AlgoArg::Hybrid => Algorithm::Hybrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Brute,
    Dinkelbach,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    UniformDigraph,
    Layered,
    TwoCliquesBridge,
    UnbalancedCut,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::UniformDigraph => Model::UniformDigraph,
            ModelArg::Layered => Model::Layered,
            ModelArg::TwoCliquesBridge => Model::TwoCliquesBridge,
            ModelArg::UnbalancedCut => Model::UnbalancedCut,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// Solver parameters shared by `solve`, `bench` and `verify`.
#[derive(Args)]
struct SolverArgs {
    /// Seed for the sparsifier; `BALFLOW_SEED` takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sparsifier imbalance parameter.
    #[arg(long, default_value_t = 9.0)]
    beta: f64,
    /// Energy horizon; `max(n^4, n m)` by default.
    #[arg(long = "M", alias = "big-m")]
    big_m: Option<f64>,
    /// Expander conductance target of the sparsifier hierarchy.
    #[arg(long, alias = "sparsifier-phi", default_value_t = 0.1)]
    phi: f64,
    /// Sparsifier union-bound exponent.
    #[arg(long = "sparsifier-c", default_value_t = 3.0)]
    sparsifier_c: f64,
    #[arg(long, value_enum, default_value = "dinkelbach")]
    oracle: OracleArg,
    /// Stop after `factor * (m + n (F + 1))` units of work.
    #[arg(long)]
    runtime_guard: Option<f64>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let mut cfg = SolverConfig {
            beta: self.beta,
            big_m: self.big_m,
            runtime_guard_factor: self.runtime_guard,
            ..SolverConfig::default()
        };
        cfg.sparsifier.phi = self.phi;
        cfg.sparsifier.c = self.sparsifier_c;
        cfg.sparsifier.seed = effective_seed(self.seed)?;
        cfg.oracle.method = match self.oracle {
            OracleArg::Brute => OracleMethod::BruteForce,
            OracleArg::Dinkelbach => OracleMethod::Dinkelbach,
        };
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "balanced")]
    algo: AlgoArg,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    /// Print the energy trace as CSV after the summary.
    #[arg(long)]
    trace_energy: bool,
    /// Write run statistics as JSON to this file.
    #[arg(long)]
    stats_json: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Layer width, bridge count or reverse-arc count.
    #[arg(long)]
    k: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// DIMACS instances; random instances are generated when none are given.
    #[arg(long)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 40)]
    n_max: usize,
    #[arg(long, default_value_t = 300)]
    m_max: usize,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "dinic,balanced,hybrid"
    )]
    algos: Vec<AlgoArg>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Include wall times, which makes reports non-reproducible.
    #[arg(long)]
    timing: bool,
    /// Run instances one at a time.
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    sequential: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var("BALFLOW_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .with_context(|| format!("BALFLOW_SEED={s:?} is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

fn exec_mode(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let g =
        read_dimacs(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mut cfg = args.solver.config()?;
    cfg.trace_energy = args.trace_energy;
    let algo = Algorithm::from(args.algo);
    let r = match run_algorithm(algo, &g, &cfg) {
        Ok(r) => r,
        Err(e) if e.is_invariant_breach() => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_BREACH));
        }
        Err(e) => return Err(e.into()),
    };
    let s = &r.stats;
    println!("algo {}", algo.name());
    println!("value {}", r.value);
    println!("augmentations {}", s.augmentations);
    println!("toggle_calls {}", s.toggle_calls);
    println!("sparsifier_fallbacks {}", s.sparsifier_fallbacks);
    println!("energy_initial {}", s.energy_initial);
    println!("energy_final {}", s.energy_final);
    println!("wall_ms {:.3}", s.wall_ms);
    if args.trace_energy {
        print!("{}", r.ledger.trace_csv());
    }
    if let Some(path) = &args.stats_json {
        let stats = json!({
            "value": r.value,
            "augmentations": s.augmentations,
            "toggle_calls": s.toggle_calls,
            "sparsifier_fallbacks": s.sparsifier_fallbacks,
            "energy_initial": s.energy_initial,
            "energy_final": s.energy_final,
            "wall_ms": s.wall_ms,
        });
        fs::write(path, serde_json::to_string_pretty(&stats)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn gen(args: &GenArgs) -> Result<ExitCode> {
    let spec = GenSpec {
        k: args.k,
        ..GenSpec::new(
            args.model.into(),
            args.n,
            args.m,
            effective_seed(args.seed)?,
        )
    };
    let g = generate(&spec)?;
    emit(&write_dimacs(&g), args.output.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &BenchArgs) -> Result<ExitCode> {
    let cfg = args.solver.config()?;
    let instances: Vec<Instance> = if args.input.is_empty() {
        fuzz_specs(args.count, cfg.sparsifier.seed, args.n_max, args.m_max)
            .iter()
            .map(Instance::generated)
            .collect::<Result<_, FlowError>>()?
    } else {
        args.input
            .iter()
            .map(|p| {
                Ok(Instance {
                    name: p.display().to_string(),
                    graph: read_dimacs(p).with_context(|| format!("reading {}", p.display()))?,
                    seed: 0,
                })
            })
            .collect::<Result<_>>()?
    };
    let algos: Vec<Algorithm> = args.algos.iter().map(|&a| a.into()).collect();
    let report = run_suite(
        &instances,
        &algos,
        &cfg,
        exec_mode(args.sequential),
        args.timing,
    );
    let text = match args.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    emit(&text, args.output.as_deref())?;
    if !report.passed() {
        eprintln!("{} failed rows", report.failed_rows);
        return Ok(ExitCode::from(EXIT_BREACH));
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &VerifyArgs) -> Result<ExitCode> {
    let cfg = args.solver.config()?;
    let report = run_verify(
        args.count,
        cfg.sparsifier.seed,
        &cfg,
        exec_mode(args.sequential),
    )?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for c in &report.checks {
            let status = if c.passed() { "ok" } else { "FAIL" };
            println!("{status:4} {:24} {} checked", c.name, c.checked);
            for v in c.violations.iter().take(5) {
                println!("     {v}");
            }
        }
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_BREACH)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Gen(a) => gen(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let breach = e
                .downcast_ref::<FlowError>()
                .is_some_and(FlowError::is_invariant_breach);
            ExitCode::from(if breach { EXIT_BREACH } else { 1 })
        }
    }
}
