//! Factorized representation of the supra-adjacency matrix.
//!
//! The pairwise affinity matrices are split as `K_qi = U Vᵀ` and
//! `K_qt = S Tᵀ`. Each factor column is scattered through the edge
//! incidences into small vertex-by-vertex matrices
//!
//! ```text
//! A1[m]    = G1i diag(u_m)   H1iᵀ        A2[m][n] = G2i diag(v_{m,n}) H2iᵀ
//! B1[m]    = G1t diag(s_m)   H1tᵀ        B2[m][n] = G2t diag(t_{m,n}) H2tᵀ
//! ```
//!
//! where `v_{m,n}` is the `n`-th layer block of column `m` of `V`. Every
//! objective term is then a trace over these `N × N` matrices.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::affinity::LayerAffinities;
use crate::error::{Error, Result};
use crate::model::{EdgeIncidence, IncidenceBundle, LayerConfidence, LayerIncidence};
use crate::problem::{pad_with_dummies, DummyMap, MatchingProblem};

/// Relative singular-value cutoff used when splitting the pairwise matrices.
pub const DEFAULT_SVD_TOL: f64 = 1e-10;

/// Largest `N_L · N1 · N2` for which [`assemble_dense_supra`] will run.
pub const DENSE_SUPRA_LIMIT: usize = 200;

/// `K ≈ left · rightᵀ` with `rank` columns in each factor.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankFactors {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl LowRankFactors {
    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }
}

/// Truncated SVD split with the singular values shared as `√σ` between the factors.
pub fn split_pairwise(k: &DMatrix<f64>, tol: f64) -> Result<LowRankFactors> {
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pairwise affinity matrix"));
    }
    let (rows, cols) = k.shape();
    if rows == 0 || cols == 0 || k.iter().all(|&v| v == 0.0) {
        return Ok(LowRankFactors {
            left: DMatrix::zeros(rows, 0),
            right: DMatrix::zeros(cols, 0),
        });
    }
    let (u, sigma, v) = thin_svd(k);
    let smax = sigma.max();
    let keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > tol * smax).collect();
    let mut left = DMatrix::zeros(rows, keep.len());
    let mut right = DMatrix::zeros(cols, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let root = sigma[i].sqrt();
        left.set_column(c, &(u.column(i) * root));
        right.set_column(c, &(v.column(i) * root));
    }
    Ok(LowRankFactors { left, right })
}

/// Thin SVD `k = U diag(σ) Vᵀ`. Strongly rectangular inputs are first reduced
/// by a QR factorization so the SVD runs on the small square factor.
fn thin_svd(k: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = k.shape();
    if cols >= 2 * rows {
        // kᵀ = Q R  →  k = Rᵀ Qᵀ
        let qr = k.transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        let svd = r.transpose().svd(true, true);
        let w = svd.v_t.expect("requested").transpose();
        (svd.u.expect("requested"), svd.singular_values, q * w)
    } else if rows >= 2 * cols {
        let qr = k.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let svd = r.svd(true, true);
        let v = svd.v_t.expect("requested").transpose();
        (q * svd.u.expect("requested"), svd.singular_values, v)
    } else {
        let svd = k.clone().svd(true, true);
        let v = svd.v_t.expect("requested").transpose();
        (svd.u.expect("requested"), svd.singular_values, v)
    }
}

/// Confidence-dependent weights of the objective.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices {
    /// `W_i = (L_Cᵀ L_Gi) ∘ (L_Cᵀ L_Hi)`
    pub w_intra: RowDVector<f64>,
    /// `W_t = (L_Cᵀ L_Gt) ∘ (L_Cᵀ L_Ht)`
    pub w_inter: RowDVector<f64>,
    /// `Λ_i = L_Hiᵀ L_C L_Cᵀ L_Gi`
    pub lambda_intra: DMatrix<f64>,
    /// `Λ_t = L_Htᵀ L_C L_Cᵀ L_Gt`
    pub lambda_inter: DMatrix<f64>,
}

impl CouplingMatrices {
    /// Diagonal of `Λ_i`, the per-layer weights of the intra-layer terms.
    pub fn intra_weights(&self) -> Vec<f64> {
        self.lambda_intra.diagonal().iter().copied().collect()
    }

    /// Diagonal of `Λ_t`, one weight per ordered layer pair.
    pub fn inter_weights(&self) -> Vec<f64> {
        self.lambda_inter.diagonal().iter().copied().collect()
    }
}

pub fn build_coupling(lc: &LayerConfidence, layers: &LayerIncidence) -> Result<CouplingMatrices> {
    if lc.len() != layers.n_layers() {
        return Err(Error::Dimension(format!(
            "confidence has {} entries for {} layers",
            lc.len(),
            layers.n_layers()
        )));
    }
    let l = DVector::from_column_slice(lc.values());
    let lt = l.transpose();
    let (lgi, lhi) = (layers.intra_start(), layers.intra_end());
    let (lgt, lht) = (layers.inter_start(), layers.inter_end());
    let outer = &l * &lt;
    Ok(CouplingMatrices {
        w_intra: (&lt * &lgi).component_mul(&(&lt * &lhi)),
        w_inter: (&lt * &lgt).component_mul(&(&lt * &lht)),
        lambda_intra: lhi.transpose() * &outer * &lgi,
        lambda_inter: lht.transpose() * &outer * &lgt,
    })
}

/// Everything the objective needs that does not depend on `X` or `L_C`.
///
/// Always square: unequal graphs are padded with dummy vertices on construction.
#[derive(Clone, Debug)]
pub struct FactorizedProblem {
    pub n: usize,
    pub n_layers: usize,
    pub dummies: DummyMap,
    pub incidences: IncidenceBundle,
    pub affinities: LayerAffinities,
    /// `K_p`, `n × (n · N_L)`
    pub unary: DMatrix<f64>,
    /// `K_qi`, `M1i × (M2i · N_L)`
    pub intra: DMatrix<f64>,
    /// `K_qt`, `M1t × (M2t · N_L(N_L−1))`
    pub inter: DMatrix<f64>,
    /// `U`, `V`
    pub intra_factors: LowRankFactors,
    /// `S`, `T`
    pub inter_factors: LowRankFactors,
    pub a1: Vec<DMatrix<f64>>,
    /// `a2[m][n]`
    pub a2: Vec<Vec<DMatrix<f64>>>,
    pub b1: Vec<DMatrix<f64>>,
    /// `b2[m][n]`
    pub b2: Vec<Vec<DMatrix<f64>>>,
}

pub fn build_factorized_problem(problem: &MatchingProblem, tol: f64) -> Result<FactorizedProblem> {
    problem.validate()?;
    let (padded, dummies) = pad_with_dummies(problem);
    let n = dummies.padded_size();
    let inc = padded.incidences();
    let aff = padded.affinities;
    let n_layers = padded.n_layers;

    let unary = aff.unary_concat(n);
    let intra = aff.intra_concat(inc.intra1.n_edges());
    let inter = aff.inter_concat(inc.inter1.n_edges());
    let intra_factors = split_pairwise(&intra, tol)?;
    let inter_factors = split_pairwise(&inter, tol)?;

    let (a1, a2) = scatter_factors(&intra_factors, &inc.intra1, &inc.intra2, n_layers);
    let (b1, b2) = scatter_factors(&inter_factors, &inc.inter1, &inc.inter2, inc.layers.n_inter_blocks());

    Ok(FactorizedProblem {
        n,
        n_layers,
        dummies,
        incidences: inc,
        affinities: aff,
        unary,
        intra,
        inter,
        intra_factors,
        inter_factors,
        a1,
        a2,
        b1,
        b2,
    })
}

type Scattered = (Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>);

fn scatter_factors(f: &LowRankFactors, e1: &EdgeIncidence, e2: &EdgeIncidence, blocks: usize) -> Scattered {
    let m2 = e2.n_edges();
    let mut first = Vec::with_capacity(f.rank());
    let mut second = Vec::with_capacity(f.rank());
    for m in 0..f.rank() {
        first.push(scatter(e1, f.left.column(m).iter().copied()));
        let v = f.right.column(m);
        second.push(
            (0..blocks)
                .map(|n| scatter(e2, v.rows(n * m2, m2).iter().copied()))
                .collect(),
        );
    }
    (first, second)
}

/// `G diag(w) Hᵀ` for an edge incidence `(G, H)`.
pub fn scatter(inc: &EdgeIncidence, weights: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(inc.n_vertices(), inc.n_vertices());
    for ((&s, &e), w) in inc.starts().iter().zip(inc.ends()).zip(weights) {
        out[(s, e)] += w;
    }
    out
}

impl FactorizedProblem {
    pub fn intra_rank(&self) -> usize {
        self.intra_factors.rank()
    }

    pub fn inter_rank(&self) -> usize {
        self.inter_factors.rank()
    }

    pub fn n_inter_blocks(&self) -> usize {
        self.incidences.layers.n_inter_blocks()
    }

    /// Number of stored scalars: affinity blocks, factors, `A`/`B` matrices
    /// and incidences in column-index form.
    pub fn stored_scalars(&self) -> usize {
        let mats = |v: &[DMatrix<f64>]| v.iter().map(|m| m.len()).sum::<usize>();
        let nested = |v: &[Vec<DMatrix<f64>>]| v.iter().map(|row| mats(row)).sum::<usize>();
        let inc = &self.incidences;
        let edge_indices =
            2 * (inc.intra1.n_edges() + inc.intra2.n_edges() + inc.inter1.n_edges() + inc.inter2.n_edges());
        let nl = self.n_layers;
        let layer_indices = 2 * (nl + inc.layers.n_inter_blocks());
        self.unary.len()
            + self.intra.len()
            + self.inter.len()
            + self.intra_factors.left.len()
            + self.intra_factors.right.len()
            + self.inter_factors.left.len()
            + self.inter_factors.right.len()
            + mats(&self.a1)
            + nested(&self.a2)
            + mats(&self.b1)
            + nested(&self.b2)
            + edge_indices
            + layer_indices
    }

    /// Entry count of the explicit supra-adjacency matrix, `(N_L · n²)²`.
    pub fn dense_supra_scalars(&self) -> usize {
        let d = self.n_layers * self.n * self.n;
        d * d
    }
}

/// The explicit supra-adjacency matrix
///
/// ```text
/// P = diag(vec(K_p))
///   + (L_Gi ⊗ G2i ⊗ G1i) diag(vec(K_qi)) (L_Hi ⊗ H2i ⊗ H1i)ᵀ
///   + (L_Gt ⊗ G2t ⊗ G1t) diag(vec(K_qt)) (L_Ht ⊗ H2t ⊗ H1t)ᵀ
/// ```
///
/// Rows and columns are indexed as in `L_C ⊗ vec(X)`.
pub fn assemble_dense_supra(problem: &FactorizedProblem) -> Result<DMatrix<f64>> {
    let size = problem.n_layers * problem.n * problem.n;
    if size > DENSE_SUPRA_LIMIT {
        return Err(Error::TooLarge {
            what: "dense supra-adjacency assembly",
            size,
            limit: DENSE_SUPRA_LIMIT,
        });
    }
    let inc = &problem.incidences;
    let mut p = DMatrix::from_diagonal(&DVector::from_column_slice(problem.unary.as_slice()));
    p += kron_term(
        &inc.layers.intra_start(),
        &inc.layers.intra_end(),
        &inc.intra1,
        &inc.intra2,
        &problem.intra,
    );
    p += kron_term(
        &inc.layers.inter_start(),
        &inc.layers.inter_end(),
        &inc.inter1,
        &inc.inter2,
        &problem.inter,
    );
    Ok(p)
}

fn kron_term(
    lg: &DMatrix<f64>,
    lh: &DMatrix<f64>,
    e1: &EdgeIncidence,
    e2: &EdgeIncidence,
    k: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut left = lg.kronecker(&e2.start_matrix()).kronecker(&e1.start_matrix());
    let right = lh.kronecker(&e2.end_matrix()).kronecker(&e1.end_matrix());
    // right-multiplication by diag(vec(K))
    for (mut col, &w) in left.column_iter_mut().zip(k.as_slice()) {
        col *= w;
    }
    left * right.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }

    #[test]
    fn rank_one_split_is_exact() {
        let u = DVector::from_vec(vec![1.0, 2.0, -0.5]);
        let v = DVector::from_vec(vec![0.3, 0.0, 4.0, 1.5]);
        let k = &u * v.transpose();
        let f = split_pairwise(&k, DEFAULT_SVD_TOL).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.reconstruct() - &k).abs().max() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = split_pairwise(&DMatrix::zeros(4, 6), DEFAULT_SVD_TOL).unwrap();
        assert_eq!(f.rank(), 0);
        assert_eq!(f.left.shape(), (4, 0));
        assert_eq!(f.right.shape(), (6, 0));
        assert_eq!(f.reconstruct(), DMatrix::zeros(4, 6));
    }

    #[test]
    fn random_split_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(r, c) in &[(6, 10), (10, 6), (6, 30), (30, 6), (7, 7)] {
            let k = random(r, c, &mut rng);
            let f = split_pairwise(&k, DEFAULT_SVD_TOL).unwrap();
            assert!((f.reconstruct() - &k).norm() / k.norm() <= 1e-9);
            // √σ split: both factors carry the same column norms
            for m in 0..f.rank() {
                let (l, rr) = (f.left.column(m).norm(), f.right.column(m).norm());
                assert!((l - rr).abs() < 1e-9 * l.max(1.0));
            }
        }
    }

    #[test]
    fn non_finite_split_is_rejected() {
        let mut k = DMatrix::zeros(2, 2);
        k[(0, 1)] = f64::NAN;
        assert!(matches!(split_pairwise(&k, 1e-10), Err(Error::NonFinite(_))));
    }

    #[test]
    fn coupling_examples() {
        let two = crate::model::build_layer_incidence(2).unwrap();
        let c = build_coupling(&LayerConfidence::uniform(2), &two).unwrap();
        assert_eq!(c.intra_weights(), vec![0.25, 0.25]);
        assert_eq!(c.inter_weights(), vec![0.25, 0.25]);

        let c = build_coupling(&LayerConfidence::new(vec![1.0, 0.0]).unwrap(), &two).unwrap();
        assert_eq!(c.intra_weights(), vec![1.0, 0.0]);
        assert_eq!(c.inter_weights(), vec![0.0, 0.0]);
        assert_eq!(c.w_intra.iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);

        let one = crate::model::build_layer_incidence(1).unwrap();
        let c = build_coupling(&LayerConfidence::new(vec![0.7]).unwrap(), &one).unwrap();
        assert!((c.lambda_intra[(0, 0)] - 0.49).abs() < 1e-15);
        assert_eq!(c.lambda_inter.shape(), (0, 0));

        assert!(build_coupling(&LayerConfidence::uniform(3), &two).is_err());
    }

    #[test]
    fn inter_lambda_diagonal_is_pair_product() {
        let three = crate::model::build_layer_incidence(3).unwrap();
        let lc = LayerConfidence::new(vec![0.2, 0.5, 0.3]).unwrap();
        let c = build_coupling(&lc, &three).unwrap();
        for (k, &(a, b)) in three.inter_pairs().iter().enumerate() {
            let expect = lc.values()[a] * lc.values()[b];
            assert!((c.lambda_inter[(k, k)] - expect).abs() < 1e-15);
            assert!((c.w_inter[k] - expect).abs() < 1e-15);
        }
        for a in 0..3 {
            assert!((c.lambda_intra[(a, a)] - lc.values()[a].powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn scatter_matches_incidence_product() {
        let inc = EdgeIncidence::from_pairs(4, &[(0, 1), (1, 2), (3, 0), (2, 1)]).unwrap();
        let w = [0.5, -1.0, 2.0, 0.25];
        let lit =
            inc.start_matrix() * DMatrix::from_diagonal(&DVector::from_column_slice(&w)) * inc.end_matrix().transpose();
        assert_eq!(scatter(&inc, w.iter().copied()), lit);
    }
}
