//! Matching objective and its convex/concave relaxations.
//!
//! With `Λ_i`, `Λ_t` the confidence couplings and `A`, `B` the factor
//! matrices of [`FactorizedProblem`]:
//!
//! ```text
//! F_gm  = tr(K_pᵀ(L_Cᵀ ⊗ X)) + Σ [Λ_i]_nn tr(A1[m]ᵀ X A2[m][n] Xᵀ) + Σ [Λ_t]_nn tr(B1[m]ᵀ X B2[m][n] Xᵀ)
//! F_con = Σ [Λ_i]_nn (‖Xᵀ A1[m]‖² + ‖A2[m][n] Xᵀ‖²) + (same with B)
//! F_vex = F_gm − ½ F_con      F_cav = F_gm + ½ F_con
//! F_θ   = (1−θ) F_vex + θ F_cav
//! ```
//!
//! The free functions evaluate these literally from the `A`/`B` matrices.
//! [`QuadraticModel`] folds the same terms into a dense quadratic form for
//! the solver's inner loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factorization::{build_coupling, CouplingMatrices, FactorizedProblem};
use crate::model::LayerConfidence;

/// A differentiable function of the assignment matrix.
pub trait SmoothObjective {
    fn value(&self, x: &DMatrix<f64>) -> f64;
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    /// `∇F(x + d) − ∇F(x)`, which is `H·d` for a quadratic objective.
    fn hessian_apply(&self, x: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
        self.gradient(&(x + d)) - self.gradient(x)
    }

    /// `H·P` for the permutation matrix of `perm`.
    fn hessian_permutation(&self, perm: &[usize]) -> DMatrix<f64> {
        let n = perm.len();
        let mut p = DMatrix::zeros(n, n);
        for (i, &a) in perm.iter().enumerate() {
            p[(i, a)] = 1.0;
        }
        self.hessian_apply(&DMatrix::zeros(n, n), &p)
    }
}

/// A factorized problem bound to a confidence vector and a path parameter.
#[derive(Clone, Debug)]
pub struct ObjectiveContext<'a> {
    problem: &'a FactorizedProblem,
    confidence: LayerConfidence,
    coupling: CouplingMatrices,
    theta: f64,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(problem: &'a FactorizedProblem, confidence: LayerConfidence, theta: f64) -> Result<Self> {
        check_theta(theta)?;
        let coupling = build_coupling(&confidence, &problem.incidences.layers)?;
        Ok(Self {
            problem,
            confidence,
            coupling,
            theta,
        })
    }

    pub fn problem(&self) -> &'a FactorizedProblem {
        self.problem
    }

    pub fn confidence(&self) -> &LayerConfidence {
        &self.confidence
    }

    pub fn coupling(&self) -> &CouplingMatrices {
        &self.coupling
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn set_theta(&mut self, theta: f64) -> Result<()> {
        check_theta(theta)?;
        self.theta = theta;
        Ok(())
    }

    /// Replace `L_C` and rebuild `W_i`, `W_t`, `Λ_i`, `Λ_t`.
    pub fn set_confidence(&mut self, confidence: LayerConfidence) -> Result<()> {
        self.coupling = build_coupling(&confidence, &self.problem.incidences.layers)?;
        self.confidence = confidence;
        Ok(())
    }

    pub fn check_shape(&self, x: &DMatrix<f64>) -> Result<()> {
        let n = self.problem.n;
        if x.shape() != (n, n) {
            return Err(Error::Dimension(format!("X is {:?}, expected ({n}, {n})", x.shape())));
        }
        Ok(())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0,1], got {theta}")));
    }
    Ok(())
}

/// `(L_C ⊗ vec(X))ᵀ P (L_C ⊗ vec(X))` on an explicit supra-adjacency matrix.
pub fn f_gm_dense(x: &DMatrix<f64>, lc: &LayerConfidence, p: &DMatrix<f64>) -> Result<f64> {
    let d = lc.len() * x.len();
    if p.shape() != (d, d) {
        return Err(Error::Dimension(format!("P is {:?}, expected ({d}, {d})", p.shape())));
    }
    let vx = DVector::from_column_slice(x.as_slice());
    let v = DVector::from_column_slice(lc.values()).kronecker(&vx);
    Ok(v.dot(&(p * &v)))
}

fn unary_block(problem: &FactorizedProblem, layer: usize) -> nalgebra::DMatrixView<'_, f64> {
    let n = problem.n;
    problem.unary.view((0, layer * n), (n, n))
}

/// `tr(K_pᵀ(L_Cᵀ ⊗ X)) = Σ_α L_C[α] ⟨K_p^{α;α}, X⟩`
fn unary_term(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> f64 {
    ctx.confidence
        .values()
        .iter()
        .enumerate()
        .map(|(layer, &l)| l * unary_block(ctx.problem, layer).dot(x))
        .sum()
}

fn pair_traces(x: &DMatrix<f64>, first: &[DMatrix<f64>], second: &[Vec<DMatrix<f64>>], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (a1, a2m) in first.iter().zip(second) {
        for (a2, &w) in a2m.iter().zip(weights) {
            if w != 0.0 {
                // tr(A1ᵀ X A2 Xᵀ) = ⟨A1, X A2 Xᵀ⟩
                total += w * a1.dot(&(x * a2 * x.transpose()));
            }
        }
    }
    total
}

pub fn f_gm(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<f64> {
    ctx.check_shape(x)?;
    let p = ctx.problem;
    Ok(unary_term(x, ctx)
        + pair_traces(x, &p.a1, &p.a2, &ctx.coupling.intra_weights())
        + pair_traces(x, &p.b1, &p.b2, &ctx.coupling.inter_weights()))
}

fn con_traces(x: &DMatrix<f64>, first: &[DMatrix<f64>], second: &[Vec<DMatrix<f64>>], weights: &[f64]) -> f64 {
    let xt = x.transpose();
    let mut total = 0.0;
    for (a1, a2m) in first.iter().zip(second) {
        let left = (&xt * a1).norm_squared();
        for (a2, &w) in a2m.iter().zip(weights) {
            if w != 0.0 {
                total += w * (left + (a2 * &xt).norm_squared());
            }
        }
    }
    total
}

pub fn f_con(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<f64> {
    ctx.check_shape(x)?;
    let p = ctx.problem;
    Ok(con_traces(x, &p.a1, &p.a2, &ctx.coupling.intra_weights())
        + con_traces(x, &p.b1, &p.b2, &ctx.coupling.inter_weights()))
}

/// `Σ w ‖Xᵀ A1 + sign · A2 Xᵀ‖²_F`
fn frobenius_terms(
    x: &DMatrix<f64>,
    first: &[DMatrix<f64>],
    second: &[Vec<DMatrix<f64>>],
    weights: &[f64],
    sign: f64,
) -> f64 {
    let xt = x.transpose();
    let mut total = 0.0;
    for (a1, a2m) in first.iter().zip(second) {
        let left = &xt * a1;
        for (a2, &w) in a2m.iter().zip(weights) {
            if w != 0.0 {
                total += w * (&left + (a2 * &xt) * sign).norm_squared();
            }
        }
    }
    total
}

fn relaxation(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>, sign: f64) -> Result<f64> {
    ctx.check_shape(x)?;
    let p = ctx.problem;
    let pairwise = frobenius_terms(x, &p.a1, &p.a2, &ctx.coupling.intra_weights(), sign)
        + frobenius_terms(x, &p.b1, &p.b2, &ctx.coupling.inter_weights(), sign);
    Ok(unary_term(x, ctx) + 0.5 * sign * pairwise)
}

/// `tr(K_pᵀ(L_Cᵀ⊗X)) − ½ Σ Λ ‖XᵀA1 − A2Xᵀ‖²` (negative semidefinite Hessian).
pub fn f_vex(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<f64> {
    relaxation(x, ctx, -1.0)
}

/// `tr(K_pᵀ(L_Cᵀ⊗X)) + ½ Σ Λ ‖XᵀA1 + A2Xᵀ‖²` (positive semidefinite Hessian).
pub fn f_cav(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<f64> {
    relaxation(x, ctx, 1.0)
}

pub fn f_theta(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<f64> {
    let t = ctx.theta;
    Ok((1.0 - t) * f_vex(x, ctx)? + t * f_cav(x, ctx)?)
}

/// Analytic gradient of `F_θ`, built term by term:
/// `∇tr(AᵀXBXᵀ) = AXBᵀ + AᵀXB`, `∇‖XᵀA‖² = 2AAᵀX`, `∇‖BXᵀ‖² = 2XBᵀB`.
pub fn grad_f_theta(x: &DMatrix<f64>, ctx: &ObjectiveContext<'_>) -> Result<DMatrix<f64>> {
    ctx.check_shape(x)?;
    let p = ctx.problem;
    let n = p.n;
    let con_scale = ctx.theta - 0.5;
    let mut g = DMatrix::zeros(n, n);
    for (layer, &l) in ctx.confidence.values().iter().enumerate() {
        g += unary_block(p, layer) * l;
    }
    let groups = [
        (&p.a1, &p.a2, ctx.coupling.intra_weights()),
        (&p.b1, &p.b2, ctx.coupling.inter_weights()),
    ];
    for (first, second, weights) in groups {
        for (a1, a2m) in first.iter().zip(second.iter()) {
            let a1a1t = a1 * a1.transpose();
            for (a2, &w) in a2m.iter().zip(&weights) {
                if w == 0.0 {
                    continue;
                }
                let gm = a1 * x * a2.transpose() + a1.transpose() * x * a2;
                let con = &a1a1t * x * 2.0 + x * (a2.transpose() * a2) * 2.0;
                g += (gm + con * con_scale) * w;
            }
        }
    }
    Ok(g)
}

impl SmoothObjective for ObjectiveContext<'_> {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        f_theta(x, self).expect("assignment shape is checked by the caller")
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        grad_f_theta(x, self).expect("assignment shape is checked by the caller")
    }
}

/// Confidence-independent precomputation of every objective term as dense
/// matrices over `vec(X)`.
///
/// The intra-layer term of layer `n` is the quadratic form of
/// `Σ_m A2[m][n] ⊗ A1[m]`; the inter-layer part is kept in factor form and
/// combined when the weights are known. `F_con` reduces to
/// `tr(Xᵀ C_l X) + tr(X C_r Xᵀ)` with `C_l = Σ A1 A1ᵀ`, `C_r = Σ A2ᵀ A2`.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    n: usize,
    unary: Vec<DMatrix<f64>>,
    intra_lawler: Vec<DMatrix<f64>>,
    inter_left: DMatrix<f64>,
    inter_right: Vec<DMatrix<f64>>,
    con_intra_left: DMatrix<f64>,
    con_intra_right: Vec<DMatrix<f64>>,
    con_inter_left: DMatrix<f64>,
    con_inter_right: Vec<DMatrix<f64>>,
}

/// Columns `vec(mats[m])`.
fn stack_vecs<'m>(rows: usize, mats: impl ExactSizeIterator<Item = &'m DMatrix<f64>>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, mats.len());
    for (c, m) in mats.enumerate() {
        out.column_mut(c).copy_from_slice(m.as_slice());
    }
    out
}

/// `T[(i,j),(a,b)] → Q[i + a·n, j + b·n]`, i.e. `Σ_m vec(A1)vec(A2)ᵀ → Σ_m A2 ⊗ A1`.
fn add_rearranged(q: &mut DMatrix<f64>, t: &DMatrix<f64>, n: usize, weight: f64) {
    for b in 0..n {
        for j in 0..n {
            let col = j + b * n;
            for a in 0..n {
                for i in 0..n {
                    q[(i + a * n, col)] += weight * t[(i + j * n, a + b * n)];
                }
            }
        }
    }
}

fn gram_sums(
    first: &[DMatrix<f64>],
    second: &[Vec<DMatrix<f64>>],
    blocks: usize,
    n: usize,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let mut left = DMatrix::zeros(n, n);
    let mut right = vec![DMatrix::zeros(n, n); blocks];
    for (a1, a2m) in first.iter().zip(second) {
        left += a1 * a1.transpose();
        for (acc, a2) in right.iter_mut().zip(a2m) {
            *acc += a2.transpose() * a2;
        }
    }
    (left, right)
}

impl QuadraticModel {
    pub fn new(problem: &FactorizedProblem) -> Self {
        let n = problem.n;
        let nn = n * n;
        let nl = problem.n_layers;
        let unary = (0..nl).map(|l| unary_block(problem, l).into_owned()).collect();

        let p1 = stack_vecs(nn, problem.a1.iter());
        let intra_lawler = (0..nl)
            .map(|layer| {
                let p2 = stack_vecs(nn, problem.a2.iter().map(|row| &row[layer]));
                let mut q = DMatrix::zeros(nn, nn);
                add_rearranged(&mut q, &(&p1 * p2.transpose()), n, 1.0);
                q
            })
            .collect();

        let blocks = problem.n_inter_blocks();
        let inter_left = stack_vecs(nn, problem.b1.iter());
        let inter_right = (0..blocks)
            .map(|k| stack_vecs(nn, problem.b2.iter().map(|row| &row[k])))
            .collect();

        let (con_intra_left, con_intra_right) = gram_sums(&problem.a1, &problem.a2, nl, n);
        let (con_inter_left, con_inter_right) = gram_sums(&problem.b1, &problem.b2, blocks, n);
        Self {
            n,
            unary,
            intra_lawler,
            inter_left,
            inter_right,
            con_intra_left,
            con_intra_right,
            con_inter_left,
            con_inter_right,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Combine the per-layer terms for a confidence vector and its couplings.
    pub fn weighted(&self, lc: &LayerConfidence, coupling: &CouplingMatrices) -> WeightedModel {
        let n = self.n;
        let nn = n * n;
        let wi = coupling.intra_weights();
        let wt = coupling.inter_weights();

        let mut linear = DMatrix::zeros(n, n);
        for (u, &l) in self.unary.iter().zip(lc.values()) {
            linear += u * l;
        }

        let mut q = DMatrix::zeros(nn, nn);
        for (qn, &w) in self.intra_lawler.iter().zip(&wi) {
            if w != 0.0 {
                q += qn * w;
            }
        }
        if self.inter_left.ncols() > 0 && wt.iter().any(|&w| w != 0.0) {
            let mut right = DMatrix::zeros(nn, self.inter_left.ncols());
            for (r, &w) in self.inter_right.iter().zip(&wt) {
                right += r * w;
            }
            add_rearranged(&mut q, &(&self.inter_left * right.transpose()), n, 1.0);
        }
        let lawler = (&q + q.transpose()) * 0.5;

        let mut con_left = &self.con_intra_left * wi.iter().sum::<f64>();
        con_left += &self.con_inter_left * wt.iter().sum::<f64>();
        let mut con_right = DMatrix::zeros(n, n);
        for (c, &w) in self.con_intra_right.iter().zip(&wi) {
            con_right += c * w;
        }
        for (c, &w) in self.con_inter_right.iter().zip(&wt) {
            con_right += c * w;
        }
        WeightedModel {
            n,
            linear,
            lawler,
            con_left,
            con_right,
        }
    }
}

/// The objective for one confidence vector: `F_θ = ⟨L, X⟩ + vec(X)ᵀ Q vec(X) + (θ − ½) F_con`.
#[derive(Clone, Debug)]
pub struct WeightedModel {
    n: usize,
    linear: DMatrix<f64>,
    /// Symmetrized quadratic form over `vec(X)`.
    lawler: DMatrix<f64>,
    con_left: DMatrix<f64>,
    con_right: DMatrix<f64>,
}

impl WeightedModel {
    fn quad_apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        &self.lawler * DVector::from_column_slice(x.as_slice())
    }

    pub fn f_gm(&self, x: &DMatrix<f64>) -> f64 {
        let qx = self.quad_apply(x);
        self.linear.dot(x) + qx.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn f_con(&self, x: &DMatrix<f64>) -> f64 {
        (x.transpose() * &self.con_left).dot(&x.transpose()) + (x * &self.con_right).dot(x)
    }

    pub fn f_theta(&self, x: &DMatrix<f64>, theta: f64) -> f64 {
        self.f_gm(x) + (theta - 0.5) * self.f_con(x)
    }

    pub fn grad_theta(&self, x: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
        let qx = self.quad_apply(x);
        let mut g = DMatrix::from_column_slice(self.n, self.n, qx.as_slice()) * 2.0;
        g += &self.linear;
        g += (&self.con_left * x + x * &self.con_right) * (2.0 * (theta - 0.5));
        g
    }

    /// `H·d` of `F_θ`; the linear term drops out.
    pub fn hessian_apply(&self, d: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
        let qd = self.quad_apply(d);
        let mut h = DMatrix::from_column_slice(self.n, self.n, qd.as_slice()) * 2.0;
        h += (&self.con_left * d + d * &self.con_right) * (2.0 * (theta - 0.5));
        h
    }

    /// [`Self::hessian_apply`] at a permutation matrix, touching `N` columns of the Lawler matrix.
    pub fn hessian_permutation(&self, perm: &[usize], theta: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut qp = DVector::zeros(n * n);
        for (i, &a) in perm.iter().enumerate() {
            qp += self.lawler.column(i + a * n);
        }
        let mut h = DMatrix::from_column_slice(n, n, qp.as_slice()) * 2.0;
        let c = 2.0 * (theta - 0.5);
        if c != 0.0 {
            // (C_l P)[:, perm[k]] = C_l[:, k] and (P C_r)[i, :] = C_r[perm[i], :]
            for (k, &a) in perm.iter().enumerate() {
                for r in 0..n {
                    h[(r, a)] += c * self.con_left[(r, k)];
                    h[(k, r)] += c * self.con_right[(a, r)];
                }
            }
        }
        h
    }

    pub fn at_theta(&self, theta: f64) -> ThetaObjective<'_> {
        ThetaObjective { model: self, theta }
    }
}

/// A [`WeightedModel`] at a fixed path parameter.
#[derive(Clone, Copy, Debug)]
pub struct ThetaObjective<'a> {
    model: &'a WeightedModel,
    theta: f64,
}

impl SmoothObjective for ThetaObjective<'_> {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.model.f_theta(x, self.theta)
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.model.grad_theta(x, self.theta)
    }

    fn hessian_apply(&self, _x: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
        self.model.hessian_apply(d, self.theta)
    }

    fn hessian_permutation(&self, perm: &[usize]) -> DMatrix<f64> {
        self.model.hessian_permutation(perm, self.theta)
    }
}
