//! Parameter sweeps over synthetic problems with several matching methods.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{integrate_layers, single_layer};
use crate::baseline::{build_single_layer, spectral_match};
use crate::error::{Error, Result};
use crate::factorization::build_factorized_problem;
use crate::harness::metrics::{accuracy, mean_std};
use crate::harness::synthetic::{generate_synthetic_pair, SyntheticParams};
use crate::objective::QuadraticModel;
use crate::problem::MatchingProblem;
use crate::solver::{matching_objective, solve_mlfgm, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Deformation,
    Outlier,
    Attributes,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [Self::Deformation, Self::Outlier, Self::Attributes];

    pub fn name(self) -> &'static str {
        match self {
            Self::Deformation => "deformation",
            Self::Outlier => "outlier",
            Self::Attributes => "attributes",
        }
    }

    /// Fixed parameters of the sweep.
    pub fn table_params(self) -> SyntheticParams {
        let base = SyntheticParams::default();
        match self {
            Self::Deformation => SyntheticParams {
                n_inliers: 20,
                n_outliers: 2,
                n_attributes: 5,
                ..base
            },
            Self::Outlier => SyntheticParams {
                n_inliers: 20,
                n_attributes: 5,
                deformation: 0.1,
                ..base
            },
            Self::Attributes => SyntheticParams {
                n_inliers: 20,
                n_outliers: 4,
                deformation: 0.15,
                ..base
            },
        }
    }

    /// `ε ∈ {0, 0.05, …, 0.3}`, `N_out ∈ {0, 2, …, 10}`, `N_att ∈ {4, 6, …, 16}`.
    pub fn sweep(self) -> Vec<f64> {
        match self {
            Self::Deformation => (0..=6).map(|k| (5 * k) as f64 / 100.0).collect(),
            Self::Outlier => (0..=5).map(|k| (2 * k) as f64).collect(),
            Self::Attributes => (2..=8).map(|k| (2 * k) as f64).collect(),
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &SyntheticParams, value: f64) -> Result<SyntheticParams> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParameter(format!(
                    "{} sweep needs whole numbers, got {value}",
                    self.name()
                )))
            }
        };
        let mut p = base.clone();
        match self {
            Self::Deformation => p.deformation = value,
            Self::Outlier => p.n_outliers = count()?,
            Self::Attributes => p.n_attributes = count()?,
        }
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown experiment kind '{s}' (valid: deformation, outlier, attributes)"
            ))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mlfgm,
    SmIntegrated,
    SmSingleBest,
}

impl Method {
    pub const ALL: [Method; 3] = [Self::Mlfgm, Self::SmIntegrated, Self::SmSingleBest];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mlfgm => "mlfgm",
            Self::SmIntegrated => "sm-integrated",
            Self::SmSingleBest => "sm-single-best",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod {
                name: s.to_string(),
                valid: Self::ALL.map(Method::name).join(", "),
            })
    }
}

/// Parses method names, rejecting unknown ones and duplicates.
pub fn parse_methods<S: AsRef<str>>(names: &[S]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.as_ref().trim().parse()?;
        if out.contains(&m) {
            return Err(Error::InvalidParameter(format!("method '{m}' listed twice")));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Parameters held fixed during the sweep; the kind's table values when absent.
    pub base: Option<SyntheticParams>,
    /// Sweep values; the kind's full range when absent.
    pub points: Option<Vec<f64>>,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Master seed; every trial derives its own.
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Deformation,
            base: None,
            points: None,
            trials: 30,
            methods: Method::ALL.to_vec(),
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn base_params(&self) -> SyntheticParams {
        self.base.clone().unwrap_or_else(|| self.kind.table_params())
    }

    pub fn sweep_points(&self) -> Vec<f64> {
        self.points.clone().unwrap_or_else(|| self.kind.sweep())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods given".into()));
        }
        if self.sweep_points().is_empty() {
            return Err(Error::InvalidParameter("empty sweep".into()));
        }
        self.solver.validate()?;
        let base = self.base_params();
        for &v in &self.sweep_points() {
            self.kind.apply(&base, v)?;
        }
        Ok(())
    }
}

/// Seed of one trial: the first draw of stream `(point << 32) | trial` of the master generator.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    rng.random()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub method: Method,
    pub value: f64,
    pub trial: usize,
    pub accuracy: f64,
    /// `F_gm` at uniform confidence of the returned matching.
    pub objective: f64,
    pub matching: Vec<Option<usize>>,
    pub wall_ms: f64,
    /// Whether the method flagged a problem (iteration limits do not count).
    pub warned: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSummary {
    pub value: f64,
    pub methods: Vec<MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub kind: ExperimentKind,
    pub sweep_variable: String,
    pub master_seed: u64,
    pub points: Vec<PointSummary>,
    /// Total wall time per method in milliseconds.
    pub wall_times: Vec<(Method, f64)>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl BenchResult {
    pub fn summary(&self, value: f64, method: Method) -> Option<&MethodSummary> {
        self.points
            .iter()
            .find(|p| p.value == value)
            .and_then(|p| p.methods.iter().find(|m| m.method == method))
    }

    /// Mean accuracy of `method` at every sweep point, in sweep order.
    pub fn curve(&self, method: Method) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.methods.iter().find(|m| m.method == method).map(|m| (p.value, m.mean)))
            .collect()
    }

    /// Per-trial rows. Wall times are nondeterministic, so they are only
    /// written when asked for.
    pub fn to_csv(&self, timings: bool) -> String {
        let mut out = String::from("seed,method,kind,value,trial,accuracy,objective");
        if timings {
            out.push_str(",wall_ms");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{:?},{},{:?},{:?}",
                r.seed, r.method, self.kind, r.value, r.trial, r.accuracy, r.objective
            ));
            if timings {
                out.push_str(&format!(",{:.3}", r.wall_ms));
            }
            out.push('\n');
        }
        out
    }

    /// One line per sweep point: the value, then mean and std for each method.
    pub fn to_columns(&self) -> String {
        let methods: Vec<Method> = self
            .points
            .first()
            .map(|p| p.methods.iter().map(|m| m.method).collect())
            .unwrap_or_default();
        let mut out = format!("# {}", self.sweep_variable);
        for m in &methods {
            out.push_str(&format!(" {m}_mean {m}_std"));
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{:?}", p.value));
            for m in &p.methods {
                out.push_str(&format!(" {:?} {:?}", m.mean, m.std));
            }
            out.push('\n');
        }
        out
    }
}

struct MethodOutcome {
    matching: Vec<Option<usize>>,
    objective: f64,
    wall_ms: f64,
    warned: bool,
}

/// Spectral matching on the integrated single-layer affinity.
pub fn run_sm_integrated(problem: &MatchingProblem) -> Result<Vec<Option<usize>>> {
    let aff = integrate_layers(&problem.affinities)?;
    let sl = build_single_layer(&aff, &problem.intra1, &problem.intra2)?;
    Ok(spectral_match(&sl)?.matching)
}

/// Spectral matching on every layer; the layer with the best accuracy wins,
/// the first one on ties.
pub fn run_sm_single_best(problem: &MatchingProblem, truth: &[Option<usize>]) -> Result<Vec<Option<usize>>> {
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    for layer in 0..problem.n_layers {
        let aff = single_layer(&problem.affinities, layer);
        let sl = build_single_layer(&aff, &problem.intra1, &problem.intra2)?;
        let matching = spectral_match(&sl)?.matching;
        let acc = accuracy(&matching, truth);
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, matching));
        }
    }
    Ok(best.expect("problems have at least one layer").1)
}

/// Runs every method on the instance generated from `params`; `value` and
/// `trial` only label the records.
pub fn run_trial(
    params: &SyntheticParams,
    value: f64,
    trial: usize,
    methods: &[Method],
    solver: &SolverConfig,
) -> Result<Vec<TrialRecord>> {
    let pair = generate_synthetic_pair(params)?;
    let problem = pair.problem(params)?;
    let truth = &pair.ground_truth;

    let start = Instant::now();
    let fp = build_factorized_problem(&problem, solver.svd_tol)?;
    let factorize_ms = start.elapsed().as_secs_f64() * 1e3;
    let model = QuadraticModel::new(&fp);

    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let outcome = match method {
            Method::Mlfgm => {
                let cfg = SolverConfig {
                    seed: params.seed,
                    ..solver.clone()
                };
                let report = solve_mlfgm(&fp, &cfg)?;
                MethodOutcome {
                    objective: report.objective,
                    warned: report.has_warnings(),
                    matching: report.matching,
                    wall_ms: start.elapsed().as_secs_f64() * 1e3 + factorize_ms,
                }
            }
            Method::SmIntegrated | Method::SmSingleBest => {
                let matching = if method == Method::SmIntegrated {
                    run_sm_integrated(&problem)?
                } else {
                    run_sm_single_best(&problem, truth)?
                };
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                MethodOutcome {
                    objective: matching_objective(&model, &fp, &matching)?,
                    matching,
                    wall_ms,
                    warned: false,
                }
            }
        };
        out.push(TrialRecord {
            seed: params.seed,
            method,
            value,
            trial,
            accuracy: accuracy(&outcome.matching, truth),
            objective: outcome.objective,
            matching: outcome.matching,
            wall_ms: outcome.wall_ms,
            warned: outcome.warned,
        });
    }
    Ok(out)
}

/// Sweeps `cfg.kind` and records every method on every trial.
///
/// Trials run in parallel; each derives its seed from the master seed, the
/// point index and the trial index, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let base = cfg.base_params();
    let points = cfg.sweep_points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    let results: Vec<Result<Vec<TrialRecord>>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let value = points[p];
            let seed = trial_seed(cfg.seed, p, t);
            let params = SyntheticParams {
                seed,
                ..cfg.kind.apply(&base, value)?
            };
            let rows = run_trial(&params, value, t, &cfg.methods, &cfg.solver)?;
            log::debug!("{} {value} trial {t} done", cfg.kind);
            Ok(rows)
        })
        .collect();

    let mut records = Vec::with_capacity(jobs.len() * cfg.methods.len());
    for r in results {
        records.extend(r?);
    }

    let summaries = points
        .iter()
        .map(|&value| PointSummary {
            value,
            methods: cfg
                .methods
                .iter()
                .map(|&method| {
                    let acc: Vec<f64> = records
                        .iter()
                        .filter(|r| r.value == value && r.method == method)
                        .map(|r| r.accuracy)
                        .collect();
                    let (mean, std) = mean_std(&acc);
                    MethodSummary {
                        method,
                        mean,
                        std,
                        trials: acc.len(),
                    }
                })
                .collect(),
        })
        .collect();
    let wall_times = cfg
        .methods
        .iter()
        .map(|&m| (m, records.iter().filter(|r| r.method == m).map(|r| r.wall_ms).sum()))
        .collect();

    Ok(BenchResult {
        kind: cfg.kind,
        sweep_variable: cfg.kind.name().to_string(),
        master_seed: cfg.seed,
        points: summaries,
        wall_times,
        records,
    })
}
