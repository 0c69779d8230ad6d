//! Comparison methods: spectral matching on an integrated single-layer
//! affinity, exhaustive search, and a single-layer path-following reference.

use nalgebra::{DMatrix, DVector};

use crate::affinity::{IntegratedAffinity, LayerAffinities};
use crate::error::{Error, Result};
use crate::factorization::{build_factorized_problem, FactorizedProblem};
use crate::model::{Assignment, EdgeIncidence, LayerConfidence};
use crate::objective::{f_gm, f_theta, ObjectiveContext, QuadraticModel};
use crate::oracle::for_each_permutation;
use crate::problem::MatchingProblem;
use crate::solver::hungarian::{hungarian_matching, permutation_matrix};
use crate::solver::path::{initial_state, inner_solve, SolverConfig, TracePoint};

/// Largest padded size accepted by the exhaustive searches.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Lawler-form affinity `K` over `vec(X)` (index `i + a·N1`).
#[derive(Clone, Debug, PartialEq)]
pub struct SingleLayerProblem {
    pub n1: usize,
    pub n2: usize,
    pub k: DMatrix<f64>,
}

/// `K[ia, jb] = Kq[edge(i,j), edge(a,b)]`, `K[ia, ia] += Kp[i, a]`, then symmetrized.
///
/// Symmetrizing leaves `vec(X)ᵀ K vec(X)` unchanged; with directed edges
/// the raw placement is generally not symmetric.
pub fn build_single_layer(
    aff: &IntegratedAffinity,
    e1: &EdgeIncidence,
    e2: &EdgeIncidence,
) -> Result<SingleLayerProblem> {
    let (n1, n2) = (e1.n_vertices(), e2.n_vertices());
    if aff.unary.shape() != (n1, n2) || aff.intra.shape() != (e1.n_edges(), e2.n_edges()) {
        return Err(Error::Dimension(
            "integrated affinity does not fit the incidences".into(),
        ));
    }
    let d = n1 * n2;
    let mut k = DMatrix::zeros(d, d);
    for (m1, (i, j)) in e1.pairs().into_iter().enumerate() {
        for (m2, (a, b)) in e2.pairs().into_iter().enumerate() {
            k[(i + a * n1, j + b * n1)] += aff.intra[(m1, m2)];
        }
    }
    let mut k = (&k + k.transpose()) * 0.5;
    for i in 0..n1 {
        for a in 0..n2 {
            k[(i + a * n1, i + a * n1)] += aff.unary[(i, a)];
        }
    }
    Ok(SingleLayerProblem { n1, n2, k })
}

impl SingleLayerProblem {
    pub fn value(&self, x: &DMatrix<f64>) -> f64 {
        let v = DVector::from_column_slice(x.as_slice());
        v.dot(&(&self.k * &v))
    }
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub assignment: Assignment,
    pub matching: Vec<Option<usize>>,
    /// Unit-norm principal eigenvector reshaped to `N1 × N2`.
    pub eigenvector: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral matching: principal eigenvector by power iteration, then Hungarian.
pub fn spectral_match(problem: &SingleLayerProblem) -> Result<SpectralResult> {
    const TOL: f64 = 1e-8;
    const MAX_ITERS: usize = 1000;
    let d = problem.n1 * problem.n2;
    if problem.k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("single-layer affinity"));
    }
    let mut v = DVector::from_element(d, 1.0 / (d.max(1) as f64).sqrt());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERS {
        iterations += 1;
        let w = &problem.k * &v;
        let norm = w.norm();
        if norm == 0.0 {
            converged = true;
            break;
        }
        let w = w / norm;
        let delta = (&w - &v).norm();
        v = w;
        if delta < TOL {
            converged = true;
            break;
        }
    }
    let eigenvector = DMatrix::from_column_slice(problem.n1, problem.n2, v.as_slice());
    let matching = hungarian_matching(&eigenvector)?;
    Ok(SpectralResult {
        assignment: Assignment::from_matching(problem.n1, problem.n2, &matching)?,
        matching,
        eigenvector,
        iterations,
        converged,
    })
}

fn check_brute_force(n: usize) -> Result<()> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            what: "exhaustive permutation search",
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

/// Best permutation of the padded problem by `F_gm` at the given confidence.
///
/// Ties keep the lexicographically first permutation.
pub fn brute_force_qap_with(problem: &FactorizedProblem, lc: &LayerConfidence) -> Result<(Vec<usize>, f64)> {
    check_brute_force(problem.n)?;
    let model = QuadraticModel::new(problem);
    let coupling = crate::factorization::build_coupling(lc, &problem.incidences.layers)?;
    let w = model.weighted(lc, &coupling);
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for_each_permutation(problem.n, |perm| {
        let v = w.f_gm(&permutation_matrix(perm));
        if v > best.1 {
            best = (perm.to_vec(), v);
        }
    });
    Ok(best)
}

/// [`brute_force_qap_with`] at uniform confidence.
pub fn brute_force_qap(problem: &FactorizedProblem) -> Result<(Vec<usize>, f64)> {
    brute_force_qap_with(problem, &LayerConfidence::uniform(problem.n_layers))
}

/// Best permutation for `vec(X)ᵀ K vec(X)`; rectangular problems are searched over the padded square.
pub fn brute_force_single(problem: &SingleLayerProblem) -> Result<(Vec<Option<usize>>, f64)> {
    let (n1, n2) = (problem.n1, problem.n2);
    let n = n1.max(n2);
    check_brute_force(n)?;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for_each_permutation(n, |perm| {
        let mut v = 0.0;
        for i in 0..n1 {
            for j in 0..n1 {
                if perm[i] < n2 && perm[j] < n2 {
                    v += problem.k[(i + perm[i] * n1, j + perm[j] * n1)];
                }
            }
        }
        if v > best.1 {
            best = (perm.iter().take(n1).map(|&a| (a < n2).then_some(a)).collect(), v);
        }
    });
    Ok(best)
}

/// One-layer matching problem from an integrated affinity.
pub fn single_layer_problem(problem: &MatchingProblem, aff: IntegratedAffinity) -> Result<MatchingProblem> {
    MatchingProblem::new(
        problem.intra1.clone(),
        problem.intra2.clone(),
        problem.inter1.clone(),
        problem.inter2.clone(),
        LayerAffinities {
            unary: vec![aff.unary],
            intra: vec![aff.intra],
            inter: Vec::new(),
        },
        problem.ground_truth.clone(),
    )
}

/// Path following on a one-layer problem with fixed unit confidence,
/// evaluating the objective term by term from the factor matrices.
pub fn single_layer_path_following(problem: &MatchingProblem, cfg: &SolverConfig) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    if problem.n_layers != 1 {
        return Err(Error::InvalidParameter(format!(
            "single-layer path following needs one layer, got {}",
            problem.n_layers
        )));
    }
    let fp = build_factorized_problem(problem, cfg.svd_tol)?;
    let mut ctx = ObjectiveContext::new(&fp, LayerConfidence::uniform(1), 0.0)?;
    let (mut x, mut active) = initial_state(fp.n, cfg.variant)?;
    let opts = cfg.fw_options();
    let mut trace = Vec::new();
    for theta in cfg.theta_grid() {
        ctx.set_theta(theta)?;
        let r = inner_solve(&ctx, &x, &mut active, &opts)?;
        x = r.x;
        trace.push(TracePoint {
            theta,
            f_theta: f_theta(&x, &ctx)?,
            f_gm: f_gm(&x, &ctx)?,
        });
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_affinity_selects_dominant_candidates() {
        let e = EdgeIncidence::from_pairs(3, &[]).unwrap();
        let unary = DMatrix::from_row_slice(3, 3, &[0.1, 0.9, 0.1, 0.1, 0.1, 0.8, 0.7, 0.1, 0.1]);
        let aff = IntegratedAffinity {
            unary,
            intra: DMatrix::zeros(0, 0),
        };
        let sl = build_single_layer(&aff, &e, &e).unwrap();
        assert_eq!(
            sl.k,
            DMatrix::from_diagonal(&DVector::from_column_slice(aff.unary.as_slice()))
        );
        let r = spectral_match(&sl).unwrap();
        assert!(r.converged);
        assert_eq!(r.matching, vec![Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn identity_affinity_ties_break_to_identity() {
        let sl = SingleLayerProblem {
            n1: 4,
            n2: 4,
            k: DMatrix::identity(16, 16),
        };
        let r = spectral_match(&sl).unwrap();
        assert_eq!(r.matching, (0..4).map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn brute_force_guard() {
        let sl = SingleLayerProblem {
            n1: 9,
            n2: 9,
            k: DMatrix::zeros(81, 81),
        };
        assert!(matches!(brute_force_single(&sl), Err(Error::TooLarge { .. })));
        let sl = SingleLayerProblem {
            n1: 1,
            n2: 1,
            k: DMatrix::from_element(1, 1, 2.0),
        };
        assert_eq!(brute_force_single(&sl).unwrap(), (vec![Some(0)], 2.0));
    }
}
