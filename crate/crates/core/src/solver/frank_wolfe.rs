//! Frank–Wolfe maximization over the Birkhoff polytope.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::SmoothObjective;
use crate::solver::hungarian::{hungarian, permutation_matrix};

/// Inner-loop algorithm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FwVariant {
    /// Linear-assignment direction with exact line search.
    Plain,
    /// Additionally keeps the active permutations and may step away from the worst one.
    #[default]
    AwayStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FwOptions {
    pub max_iters: usize,
    pub gap_tol: f64,
    pub variant: FwVariant,
}

#[derive(Clone, Debug)]
pub struct FwResult {
    pub x: DMatrix<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Last Frank–Wolfe gap `⟨∇F, D − X⟩`.
    pub gap: f64,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Maximizer over `[0, 1]` of the quadratic through `F(x)`, `F((x+d)/2)`, `F(d)`.
pub fn exact_line_search(obj: &impl SmoothObjective, x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let f0 = obj.value(x);
    let fh = obj.value(&((x + d) * 0.5));
    let f1 = obj.value(d);
    quadratic_argmax(f0, fh, f1)
}

/// `q(γ) = aγ² + bγ + c` with `q(0) = f0`, `q(½) = fh`, `q(1) = f1`.
pub fn quadratic_argmax(f0: f64, fh: f64, f1: f64) -> f64 {
    let a = 2.0 * (f0 - 2.0 * fh + f1);
    let b = f1 - f0 - a;
    let scale = f0.abs().max(fh.abs()).max(f1.abs()).max(1.0);
    step_size(b, a, 1.0, scale)
}

/// Maximizer of `bγ + aγ²` over `[0, γ_max]`.
fn step_size(b: f64, a: f64, gamma_max: f64, scale: f64) -> f64 {
    if a.abs() <= 1e-14 * scale {
        return if b > 0.0 { gamma_max } else { 0.0 };
    }
    if a < 0.0 {
        (-b / (2.0 * a)).clamp(0.0, gamma_max)
    } else if b * gamma_max + a * gamma_max * gamma_max > 0.0 {
        gamma_max
    } else {
        0.0
    }
}

fn gap_threshold(opts: &FwOptions, value: f64) -> f64 {
    opts.gap_tol * value.abs().max(1.0)
}

/// Iterations between exact re-evaluations of the incrementally updated value and gradient.
const REFRESH_EVERY: usize = 25;

/// Objective value and gradient carried along the iterates.
///
/// `F_θ` is quadratic, so along `x + γd` the value is `F + γ⟨∇F, d⟩ + ½γ²⟨d, Hd⟩`
/// and the gradient moves by `γ·Hd`. Every direction is `±(P − x)` for a
/// permutation `P`, and `H·x = ∇F(x) − ∇F(0)`, so a step needs only `H·P`.
struct Tracker {
    value: f64,
    grad: DMatrix<f64>,
    grad_at_zero: DMatrix<f64>,
    steps: usize,
}

impl Tracker {
    fn new(obj: &impl SmoothObjective, x: &DMatrix<f64>) -> Self {
        Self {
            value: obj.value(x),
            grad: obj.gradient(x),
            grad_at_zero: obj.gradient(&DMatrix::zeros(x.nrows(), x.ncols())),
            steps: 0,
        }
    }

    /// Exact step along `sign·(P − x)` limited to `gamma_max`; returns the step taken.
    fn step(
        &mut self,
        obj: &impl SmoothObjective,
        x: &mut DMatrix<f64>,
        perm: &[usize],
        sign: f64,
        gamma_max: f64,
    ) -> f64 {
        let d = (permutation_matrix(perm) - &*x) * sign;
        let hd = (obj.hessian_permutation(perm) - (&self.grad - &self.grad_at_zero)) * sign;
        let b = self.grad.dot(&d);
        let a = 0.5 * d.dot(&hd);
        let gamma = step_size(b, a, gamma_max, self.value.abs().max(1.0));
        if gamma == 0.0 {
            return 0.0;
        }
        *x += d * gamma;
        self.steps += 1;
        if self.steps.is_multiple_of(REFRESH_EVERY) {
            self.value = obj.value(x);
            self.grad = obj.gradient(x);
        } else {
            self.value += gamma * b + gamma * gamma * a;
            self.grad += hd * gamma;
        }
        gamma
    }
}

/// Maximize `obj` from a doubly stochastic `x0`.
pub fn frank_wolfe_max(obj: &impl SmoothObjective, x0: &DMatrix<f64>, opts: &FwOptions) -> Result<FwResult> {
    if !x0.is_square() {
        return Err(Error::Dimension(format!("X0 is {:?}, expected square", x0.shape())));
    }
    match opts.variant {
        FwVariant::Plain => plain(obj, x0.clone(), opts),
        FwVariant::AwayStep => {
            let active = ActiveSet::decompose(x0)?;
            away_step(obj, active, opts).map(|(r, _)| r)
        }
    }
}

fn finish(
    obj: &impl SmoothObjective,
    x: DMatrix<f64>,
    iterations: usize,
    converged: bool,
    gap: f64,
    mut trace: Vec<f64>,
) -> FwResult {
    let value = obj.value(&x);
    if iterations > 0 {
        *trace.last_mut().expect("trace holds the initial value") = value;
    }
    FwResult {
        x,
        value,
        iterations,
        converged,
        gap,
        trace,
    }
}

fn plain(obj: &impl SmoothObjective, mut x: DMatrix<f64>, opts: &FwOptions) -> Result<FwResult> {
    let mut t = Tracker::new(obj, &x);
    let mut trace = vec![t.value];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let perm = hungarian(&t.grad)?;
        gap = ActiveSet::score(&t.grad, &perm) - t.grad.dot(&x);
        if gap <= gap_threshold(opts, t.value) {
            converged = true;
            break;
        }
        iterations += 1;
        if t.step(obj, &mut x, &perm, 1.0, 1.0) == 0.0 {
            converged = true;
            break;
        }
        trace.push(t.value);
    }
    Ok(finish(obj, x, iterations, converged, gap, trace))
}

/// A convex combination of permutation matrices.
#[derive(Clone, Debug)]
pub struct ActiveSet {
    vertices: Vec<(Vec<usize>, f64)>,
    x: DMatrix<f64>,
}

impl ActiveSet {
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.vertices.iter().map(|(_, w)| *w)
    }

    /// Birkhoff–von Neumann decomposition of a doubly stochastic matrix.
    ///
    /// The uniform matrix is split into the `n` cyclic shifts directly.
    pub fn decompose(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let uniform = 1.0 / n as f64;
        if x.iter().all(|&v| (v - uniform).abs() <= 1e-15) {
            let vertices = (0..n)
                .map(|s| ((0..n).map(|i| (i + s) % n).collect(), uniform))
                .collect();
            return Ok(Self { vertices, x: x.clone() });
        }
        let mut rest = x.clone();
        let mut vertices = Vec::new();
        let mut remaining = 1.0;
        while remaining > 1e-12 && vertices.len() <= n * n {
            // a permutation inside the support, preferring large entries
            let support = rest.map(|v| if v > 1e-12 { 1.0 + v } else { 0.0 });
            let perm = hungarian(&support)?;
            let w = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| rest[(i, j)])
                .fold(f64::INFINITY, f64::min);
            if w <= 1e-12 {
                return Err(Error::InvalidParameter("matrix is not doubly stochastic".into()));
            }
            for (i, &j) in perm.iter().enumerate() {
                rest[(i, j)] -= w;
            }
            remaining -= w;
            vertices.push((perm, w));
        }
        let total: f64 = vertices.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut vertices {
            *w /= total;
        }
        let mut set = Self {
            vertices,
            x: DMatrix::zeros(n, n),
        };
        set.rebuild();
        Ok(set)
    }

    fn rebuild(&mut self) {
        let n = self.x.nrows();
        self.x = DMatrix::zeros(n, n);
        for (perm, w) in &self.vertices {
            for (i, &j) in perm.iter().enumerate() {
                self.x[(i, j)] += w;
            }
        }
    }

    fn score(grad: &DMatrix<f64>, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| grad[(i, j)]).sum()
    }
}

/// Away-step Frank–Wolfe. Returns the final active set for warm starts.
pub fn away_step(obj: &impl SmoothObjective, mut set: ActiveSet, opts: &FwOptions) -> Result<(FwResult, ActiveSet)> {
    let mut t = Tracker::new(obj, &set.x);
    let mut trace = vec![t.value];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let fw_perm = hungarian(&t.grad)?;
        let gx = t.grad.dot(&set.x);
        gap = ActiveSet::score(&t.grad, &fw_perm) - gx;
        if gap <= gap_threshold(opts, t.value) {
            converged = true;
            break;
        }
        iterations += 1;
        let (away_idx, away_score) = set
            .vertices
            .iter()
            .enumerate()
            .map(|(k, (p, _))| (k, ActiveSet::score(&t.grad, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("active set is never empty");
        let alpha_away = set.vertices[away_idx].1;
        let toward = gap >= gx - away_score || alpha_away >= 1.0;

        let gamma_max = if toward { 1.0 } else { alpha_away / (1.0 - alpha_away) };
        let gamma = if toward {
            t.step(obj, &mut set.x, &fw_perm, 1.0, gamma_max)
        } else {
            let away_perm = set.vertices[away_idx].0.clone();
            t.step(obj, &mut set.x, &away_perm, -1.0, gamma_max)
        };
        if gamma == 0.0 {
            converged = true;
            break;
        }
        if toward {
            for (_, w) in &mut set.vertices {
                *w *= 1.0 - gamma;
            }
            match set.vertices.iter_mut().find(|(p, _)| *p == fw_perm) {
                Some((_, w)) => *w += gamma,
                None => set.vertices.push((fw_perm, gamma)),
            }
        } else {
            for (_, w) in &mut set.vertices {
                *w *= 1.0 + gamma;
            }
            set.vertices[away_idx].1 -= gamma;
            if gamma >= gamma_max {
                set.vertices.swap_remove(away_idx);
            }
        }
        set.vertices.retain(|(_, w)| *w > 1e-15);
        trace.push(t.value);
    }
    let x = set.x.clone();
    Ok((finish(obj, x, iterations, converged, gap, trace), set))
}
