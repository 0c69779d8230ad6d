//! `mlgm`: generate, solve and benchmark multi-layer graph matching problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use mlgm_core::harness::experiment::{parse_methods, run_sm_integrated, run_sm_single_best};
use mlgm_core::harness::io::problem_to_string;
use mlgm_core::harness::metrics::accuracy;
use mlgm_core::objective::QuadraticModel;
use mlgm_core::solver::matching_objective;
use mlgm_core::{
    build_factorized_problem, generate_synthetic_pair, load_problem, run_experiment, verify, Error, ExperimentConfig,
    ExperimentKind, Method, SolveReport, SolverConfig, SyntheticParams,
};

const EXIT_WARNING: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "mlgm", version, about = "Multi-layer factorized graph matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic problem with ground truth.
    Gen(GenArgs),
    /// Solve a problem file and write the result as JSON.
    Solve(SolveArgs),
    /// Run a parameter sweep and write per-trial CSV.
    Bench(BenchArgs),
    /// Run the oracle and property checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Path-following step in θ.
    #[arg(long)]
    theta_step: Option<f64>,
    /// Keep the layer confidence uniform.
    #[arg(long)]
    no_confidence_update: bool,
}

impl SolverFlags {
    fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(step) = self.theta_step {
            cfg.theta_step = step;
        }
        if self.no_confidence_update {
            cfg.confidence_update = false;
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// TOML file with generator parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    inliers: Option<usize>,
    #[arg(long)]
    outliers: Option<usize>,
    #[arg(long)]
    attributes: Option<usize>,
    /// Attribute noise standard deviation.
    #[arg(long)]
    deformation: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long, default_value = "mlfgm")]
    method: String,
    /// TOML file with solver settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Recorded in the result; the solvers are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML experiment file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated method names.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Per-trial CSV output.
    #[arg(long)]
    out: PathBuf,
    /// JSON summary; `<out>.summary.json` when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Whitespace-separated mean/std columns per sweep point, for plotting.
    #[arg(long)]
    columns: Option<PathBuf>,
    /// Add a wall-time column to the CSV (makes it nondeterministic).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| {
        Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            msg: format!("{}: {}", path.display(), e.message()),
        }
        .into()
    })
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> anyhow::Result<u8> {
    let mut params: SyntheticParams = match &args.config {
        Some(p) => read_toml(p)?,
        None => SyntheticParams::default(),
    };
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.inliers {
        params.n_inliers = v;
    }
    if let Some(v) = args.outliers {
        params.n_outliers = v;
    }
    if let Some(v) = args.attributes {
        params.n_attributes = v;
    }
    if let Some(v) = args.deformation {
        params.deformation = v;
    }
    let pair = generate_synthetic_pair(&params)?;
    let problem = pair.problem(&params)?;
    write_output(args.out.as_deref(), &problem_to_string(&problem))?;
    info!(
        "generated {} + {} vertices, {} layers",
        params.n_inliers, params.n_outliers, params.n_attributes
    );
    Ok(0)
}

#[derive(Serialize)]
struct SolveOutput {
    method: Method,
    matching: Vec<Option<usize>>,
    /// `F_gm` at uniform confidence.
    objective: f64,
    accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<SolveReport>,
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    let method: Method = args.method.parse()?;
    let mut cfg: SolverConfig = match &args.config {
        Some(p) => read_toml(p)?,
        None => SolverConfig::default(),
    };
    args.solver.apply(&mut cfg);
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let problem = load_problem(&args.problem).with_context(|| format!("loading {}", args.problem.display()))?;
    let truth = problem.ground_truth.clone();
    let fp = build_factorized_problem(&problem, cfg.svd_tol)?;

    let (matching, objective, report) = match method {
        Method::Mlfgm => {
            let report = mlgm_core::solve_mlfgm(&fp, &cfg)?;
            (report.matching.clone(), report.objective, Some(report))
        }
        Method::SmIntegrated | Method::SmSingleBest => {
            let m = if method == Method::SmIntegrated {
                run_sm_integrated(&problem)?
            } else {
                let Some(gt) = &truth else {
                    bail!(Error::InvalidParameter(
                        "sm-single-best picks the best layer by accuracy and needs a ground truth".into()
                    ));
                };
                run_sm_single_best(&problem, gt)?
            };
            let obj = matching_objective(&QuadraticModel::new(&fp), &fp, &m)?;
            (m, obj, None)
        }
    };
    let warned = report.as_ref().is_some_and(|r| r.has_warnings());
    let out = SolveOutput {
        method,
        accuracy: truth.as_ref().map(|gt| accuracy(&matching, gt)),
        matching,
        objective,
        report,
    };
    write_output(args.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(if warned { EXIT_WARNING } else { 0 })
}

fn bench(args: BenchArgs) -> anyhow::Result<u8> {
    let mut cfg: ExperimentConfig = match &args.config {
        Some(p) => read_toml(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(kind) = &args.kind {
        let kind: ExperimentKind = kind.parse()?;
        if kind != cfg.kind {
            cfg.kind = kind;
            cfg.base = None;
            cfg.points = None;
        }
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(m) = &args.method {
        cfg.methods = parse_methods(&m.split(',').collect::<Vec<_>>())?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    args.solver.apply(&mut cfg.solver);
    cfg.validate()?;

    let result = run_experiment(&cfg)?;
    fs::write(&args.out, result.to_csv(args.timings)).with_context(|| format!("writing {}", args.out.display()))?;
    let summary = args.summary.unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".summary.json");
        PathBuf::from(p)
    });
    fs::write(&summary, serde_json::to_string_pretty(&result)? + "\n")
        .with_context(|| format!("writing {}", summary.display()))?;
    if let Some(cols) = &args.columns {
        fs::write(cols, result.to_columns()).with_context(|| format!("writing {}", cols.display()))?;
    }
    for p in &result.points {
        let line: Vec<String> = p
            .methods
            .iter()
            .map(|m| format!("{} {:.3}±{:.3}", m.method, m.mean, m.std))
            .collect();
        info!("{}={} {}", result.sweep_variable, p.value, line.join("  "));
    }
    Ok(if result.records.iter().any(|r| r.warned) {
        EXIT_WARNING
    } else {
        0
    })
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let checks = verify::run_all(args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    Ok(if failed == 0 { 0 } else { EXIT_WARNING })
}

/// Parse and input errors are usage errors; anything else is a failed run.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Parse { .. }
            | Error::Version(_)
            | Error::UnknownMethod { .. }
            | Error::InvalidParameter(_)
            | Error::Io(_),
        ) => EXIT_USAGE,
        Some(_) => EXIT_WARNING,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_USAGE,
        None => EXIT_WARNING,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MLGM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
