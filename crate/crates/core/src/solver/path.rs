//! Convex-to-concave path following with layer-confidence re-estimation.

use std::time::Instant;

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{build_coupling, build_factorized_problem, FactorizedProblem, DEFAULT_SVD_TOL};
use crate::model::{Assignment, LayerConfidence};
use crate::objective::{QuadraticModel, SmoothObjective, WeightedModel};
use crate::problem::MatchingProblem;
use crate::solver::confidence::layer_confidence;
use crate::solver::frank_wolfe::{away_step, frank_wolfe_max, ActiveSet, FwOptions, FwResult, FwVariant};
use crate::solver::hungarian::{hungarian, permutation_matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub theta_step: f64,
    pub fw_max_iters: usize,
    pub fw_gap_tol: f64,
    pub confidence_update: bool,
    pub lc_floor: f64,
    /// Carried into the report; the solver itself is deterministic.
    pub seed: u64,
    pub variant: FwVariant,
    pub svd_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta_step: 0.01,
            fw_max_iters: 200,
            fw_gap_tol: 1e-6,
            confidence_update: true,
            lc_floor: 1e-3,
            seed: 0,
            variant: FwVariant::AwayStep,
            svd_tol: DEFAULT_SVD_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_step > 0.0 && self.theta_step <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta_step must lie in (0,1], got {}",
                self.theta_step
            )));
        }
        if !(self.fw_gap_tol > 0.0) || !(self.svd_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.lc_floor >= 0.0 && self.lc_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lc_floor must lie in [0,1), got {}",
                self.lc_floor
            )));
        }
        Ok(())
    }

    /// `0, step, 2·step, …, 1`, always ending exactly at 1.
    pub fn theta_grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.theta_step - 1e-9).ceil().max(1.0) as usize;
        (0..=steps)
            .map(|k| if k == steps { 1.0 } else { k as f64 * self.theta_step })
            .collect()
    }

    pub fn fw_options(&self) -> FwOptions {
        FwOptions {
            max_iters: self.fw_max_iters,
            gap_tol: self.fw_gap_tol,
            variant: self.variant,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: f64,
    pub f_theta: f64,
    pub f_gm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    /// Binary, dummies stripped. Serialized through `matching`.
    #[serde(skip)]
    pub assignment: Assignment,
    pub matching: Vec<Option<usize>>,
    /// One point per θ step, evaluated with the confidence used during that step.
    pub objective_trace: Vec<TracePoint>,
    /// Confidence after the update at each θ step.
    pub lc_trace: Vec<(f64, Vec<f64>)>,
    pub fw_iters: Vec<usize>,
    /// Number of θ steps whose inner solve stopped at the iteration limit.
    pub fw_limit_hits: usize,
    /// Objective value within every inner solve, one list per θ step.
    #[serde(skip)]
    pub fw_traces: Vec<Vec<f64>>,
    pub final_confidence: Vec<f64>,
    /// `F_gm` of the padded binary solution at uniform confidence.
    pub objective: f64,
    /// Whether the last iterate needed a Hungarian projection.
    pub discretized: bool,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub wall_ms: f64,
}

impl SolveReport {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }
}

fn weighted(model: &QuadraticModel, problem: &FactorizedProblem, lc: &LayerConfidence) -> Result<WeightedModel> {
    Ok(model.weighted(lc, &build_coupling(lc, &problem.incidences.layers)?))
}

/// `F_gm` of `x` with uniform confidence.
pub fn uniform_objective(model: &QuadraticModel, problem: &FactorizedProblem, x: &DMatrix<f64>) -> Result<f64> {
    Ok(weighted(model, problem, &LayerConfidence::uniform(problem.n_layers))?.f_gm(x))
}

/// Completes a partial matching to a permutation of the padded size, filling
/// unmatched rows with the free columns in ascending order.
pub fn padded_permutation(matching: &[Option<usize>], n: usize) -> Result<Vec<usize>> {
    if matching.len() > n {
        return Err(Error::Dimension(format!(
            "matching has {} rows, padded size is {n}",
            matching.len()
        )));
    }
    let mut used = vec![false; n];
    for a in matching.iter().flatten() {
        if *a >= n || std::mem::replace(&mut used[*a], true) {
            return Err(Error::InvalidParameter(format!(
                "column {a} is out of range or matched twice"
            )));
        }
    }
    let mut free = (0..n).filter(|&a| !used[a]);
    let mut perm: Vec<usize> = matching
        .iter()
        .map(|a| a.unwrap_or_else(|| free.next().expect("free columns remain")))
        .collect();
    perm.extend(free);
    Ok(perm)
}

/// `F_gm` at uniform confidence of a (possibly partial) matching.
///
/// Dummy rows and columns carry no affinity, so the completion does not matter.
pub fn matching_objective(
    model: &QuadraticModel,
    problem: &FactorizedProblem,
    matching: &[Option<usize>],
) -> Result<f64> {
    let perm = padded_permutation(matching, problem.n)?;
    uniform_objective(model, problem, &permutation_matrix(&perm))
}

fn is_vertex(x: &DMatrix<f64>) -> bool {
    x.row_iter().all(|r| r.max() >= 1.0 - 1e-6)
}

/// One warm-started inner solve. The away-step variant carries its active set
/// from one θ step to the next.
pub fn inner_solve(
    obj: &impl SmoothObjective,
    x: &DMatrix<f64>,
    active: &mut Option<ActiveSet>,
    opts: &FwOptions,
) -> Result<FwResult> {
    match active.take() {
        Some(set) => {
            let (r, set) = away_step(obj, set, opts)?;
            *active = Some(set);
            Ok(r)
        }
        None => frank_wolfe_max(obj, x, opts),
    }
}

/// Initial iterate and, for the away-step variant, its decomposition.
pub fn initial_state(n: usize, variant: FwVariant) -> Result<(DMatrix<f64>, Option<ActiveSet>)> {
    let x = DMatrix::from_element(n, n, 1.0 / n as f64);
    let active = match variant {
        FwVariant::AwayStep => Some(ActiveSet::decompose(&x)?),
        FwVariant::Plain => None,
    };
    Ok((x, active))
}

/// Run the full θ path on a factorized problem.
pub fn solve_mlfgm(problem: &FactorizedProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let n = problem.n;
    let model = QuadraticModel::new(problem);
    let mut lc = LayerConfidence::uniform(problem.n_layers);
    let mut current = weighted(&model, problem, &lc)?;
    let opts = cfg.fw_options();

    let (mut x, mut active) = initial_state(n, cfg.variant)?;
    let mut report = SolveReport {
        assignment: Assignment::from_matching(0, 0, &[])?,
        matching: Vec::new(),
        objective_trace: Vec::new(),
        lc_trace: Vec::new(),
        fw_iters: Vec::new(),
        fw_limit_hits: 0,
        fw_traces: Vec::new(),
        final_confidence: Vec::new(),
        objective: 0.0,
        discretized: false,
        warnings: Vec::new(),
        seed: cfg.seed,
        wall_ms: 0.0,
    };

    for theta in cfg.theta_grid() {
        let result = inner_solve(&current.at_theta(theta), &x, &mut active, &opts)?;
        if !result.value.is_finite() {
            report.warnings.push(format!("non-finite objective at theta={theta}"));
            break;
        }
        x = result.x;
        report.objective_trace.push(TracePoint {
            theta,
            f_theta: result.value,
            f_gm: current.f_gm(&x),
        });
        report.fw_iters.push(result.iterations);
        if !result.converged && result.iterations >= cfg.fw_max_iters {
            report.fw_limit_hits += 1;
        }
        report.fw_traces.push(result.trace);
        if cfg.confidence_update {
            lc = layer_confidence(&x, problem, cfg.lc_floor)?;
            current = weighted(&model, problem, &lc)?;
        }
        report.lc_trace.push((theta, lc.values().to_vec()));
        debug!(
            "theta={theta:.3} iters={} f={:.6}",
            report.fw_iters.last().unwrap(),
            report.objective_trace.last().unwrap().f_theta
        );
    }

    report.discretized = !is_vertex(&x);
    // on a vertex this recovers the vertex itself
    let perm = hungarian(&x)?;
    let binary = permutation_matrix(&perm);
    report.objective = uniform_objective(&model, problem, &binary)?;
    let (n1, n2) = (problem.dummies.n1, problem.dummies.n2);
    report.matching = perm.iter().take(n1).map(|&a| (a < n2).then_some(a)).collect();
    report.assignment = Assignment::from_matching(n1, n2, &report.matching)?;
    report.final_confidence = lc.values().to_vec();
    if report.fw_limit_hits > 0 {
        debug!(
            "inner solve hit the iteration limit at {} theta steps",
            report.fw_limit_hits
        );
    }
    for w in &report.warnings {
        warn!("{w}");
    }
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

/// Factorize and solve.
pub fn solve(problem: &MatchingProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let fp = build_factorized_problem(problem, cfg.svd_tol)?;
    solve_mlfgm(&fp, cfg)
}
