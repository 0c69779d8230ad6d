//! Reference constructions used to cross-check the factorized code paths.
//!
//! Nothing here is fast. Each function is written as directly as possible
//! from the definitions so that agreement with the production path means
//! something.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::affinity::LayerAffinities;
use crate::error::{Error, Result};
use crate::factorization::DENSE_SUPRA_LIMIT;
use crate::model::{build_layer_incidence, EdgeIncidence};
use crate::problem::MatchingProblem;

/// Supra-adjacency built by writing each affinity entry into its block position.
///
/// Row and column `(α, i, a)` sit at `α·N1·N2 + a·N1 + i`.
pub fn direct_supra(problem: &MatchingProblem) -> Result<DMatrix<f64>> {
    let (n1, n2, nl) = (problem.n1(), problem.n2(), problem.n_layers);
    let size = nl * n1 * n2;
    if size > DENSE_SUPRA_LIMIT {
        return Err(Error::TooLarge {
            what: "direct supra-adjacency",
            size,
            limit: DENSE_SUPRA_LIMIT,
        });
    }
    let idx = |layer: usize, i: usize, a: usize| layer * n1 * n2 + a * n1 + i;
    let mut p = DMatrix::zeros(size, size);
    let aff = &problem.affinities;
    for layer in 0..nl {
        for i in 0..n1 {
            for a in 0..n2 {
                p[(idx(layer, i, a), idx(layer, i, a))] += aff.unary[layer][(i, a)];
            }
        }
        let (e1, e2) = (problem.intra1.pairs(), problem.intra2.pairs());
        for (m1, &(i, j)) in e1.iter().enumerate() {
            for (m2, &(a, b)) in e2.iter().enumerate() {
                p[(idx(layer, i, a), idx(layer, j, b))] += aff.intra[layer][(m1, m2)];
            }
        }
    }
    let layers = build_layer_incidence(nl)?;
    let (t1, t2) = (problem.inter1.pairs(), problem.inter2.pairs());
    for (k, &(alpha, beta)) in layers.inter_pairs().iter().enumerate() {
        for (m1, &(i, j)) in t1.iter().enumerate() {
            for (m2, &(a, b)) in t2.iter().enumerate() {
                p[(idx(alpha, i, a), idx(beta, j, b))] += aff.inter[k][(m1, m2)];
            }
        }
    }
    Ok(p)
}

/// Visit every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        visit(&perm);
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return;
        };
        let j = (i..n)
            .rev()
            .find(|&j| perm[j] > perm[i - 1])
            .expect("suffix has a larger entry");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}

/// Best total profit over all permutations, and the first permutation achieving it.
pub fn brute_force_assignment(profit: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = profit.nrows();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for_each_permutation(n, |perm| {
        let score: f64 = perm.iter().enumerate().map(|(i, &a)| profit[(i, a)]).sum();
        if score > best.1 {
            best = (perm.to_vec(), score);
        }
    });
    best
}

/// Settings for [`random_problem`].
#[derive(Clone, Debug)]
pub struct RandomProblemSpec {
    pub n1: usize,
    pub n2: usize,
    pub n_layers: usize,
    /// Probability that each ordered vertex pair is an edge.
    pub edge_density: f64,
    pub unary: bool,
    /// Use random pair lists instead of self-loops for the inter-layer edges.
    pub random_inter_edges: bool,
}

impl RandomProblemSpec {
    pub fn square(n: usize, n_layers: usize) -> Self {
        Self {
            n1: n,
            n2: n,
            n_layers,
            edge_density: 0.6,
            unary: true,
            random_inter_edges: false,
        }
    }
}

fn random_edges(n: usize, density: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn random_pairs(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    all.shuffle(rng);
    all.truncate(rng.random_range(1..=n.max(1) + 1).min(all.len()));
    all
}

fn uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// A problem with arbitrary non-negative affinities, not tied to any kernel.
pub fn random_problem(spec: &RandomProblemSpec, rng: &mut impl Rng) -> MatchingProblem {
    let intra1 = EdgeIncidence::from_pairs(spec.n1, &random_edges(spec.n1, spec.edge_density, rng))
        .expect("generated edges are valid");
    let intra2 = EdgeIncidence::from_pairs(spec.n2, &random_edges(spec.n2, spec.edge_density, rng))
        .expect("generated edges are valid");
    let (inter1, inter2) = if spec.random_inter_edges {
        (
            EdgeIncidence::from_pairs(spec.n1, &random_pairs(spec.n1, rng)).expect("valid pairs"),
            EdgeIncidence::from_pairs(spec.n2, &random_pairs(spec.n2, rng)).expect("valid pairs"),
        )
    } else {
        (EdgeIncidence::self_loops(spec.n1), EdgeIncidence::self_loops(spec.n2))
    };
    let nl = spec.n_layers;
    let unary = (0..nl)
        .map(|_| {
            if spec.unary {
                uniform(spec.n1, spec.n2, rng)
            } else {
                DMatrix::zeros(spec.n1, spec.n2)
            }
        })
        .collect();
    let intra = (0..nl)
        .map(|_| uniform(intra1.n_edges(), intra2.n_edges(), rng))
        .collect();
    let inter = (0..nl * (nl - 1))
        .map(|_| uniform(inter1.n_edges(), inter2.n_edges(), rng))
        .collect();
    let affinities = LayerAffinities { unary, intra, inter };
    MatchingProblem::new(intra1, intra2, inter1, inter2, affinities, None).expect("generated problem is valid")
}

/// Renames vertex `a` of graph 2 to `relabel[a]`.
///
/// Edges keep their positions, so only endpoints, unary columns and the
/// ground truth change; `X` is optimal for `problem` exactly when
/// `X·P` is optimal for the result.
pub fn relabel_second(problem: &MatchingProblem, relabel: &[usize]) -> Result<MatchingProblem> {
    let n2 = problem.n2();
    let mut seen = vec![false; n2];
    if relabel.len() != n2
        || relabel
            .iter()
            .any(|&a| a >= n2 || std::mem::replace(&mut seen[a], true))
    {
        return Err(Error::InvalidParameter(
            "relabel must be a permutation of graph 2's vertices".into(),
        ));
    }
    let map = |e: &EdgeIncidence| -> Result<EdgeIncidence> {
        let pairs: Vec<(usize, usize)> = e.pairs().into_iter().map(|(s, t)| (relabel[s], relabel[t])).collect();
        EdgeIncidence::from_pairs(n2, &pairs)
    };
    let mut affinities = problem.affinities.clone();
    for (u, orig) in affinities.unary.iter_mut().zip(&problem.affinities.unary) {
        for (a, &to) in relabel.iter().enumerate() {
            u.set_column(to, &orig.column(a));
        }
    }
    let truth = problem
        .ground_truth
        .as_ref()
        .map(|gt| gt.iter().map(|a| a.map(|a| relabel[a])).collect());
    MatchingProblem::new(
        problem.intra1.clone(),
        map(&problem.intra2)?,
        problem.inter1.clone(),
        map(&problem.inter2)?,
        affinities,
        truth,
    )
}

/// Entries uniform in `[0, 1)`.
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    uniform(rows, cols, rng)
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Sinkhorn balancing of a random positive matrix.
pub fn random_doubly_stochastic(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(n, n, |_, _| 0.05 + rng.random::<f64>());
    for _ in 0..2000 {
        for mut row in x.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        for mut col in x.column_iter_mut() {
            let s = col.sum();
            col /= s;
        }
        let worst = x.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
        if worst < 1e-14 {
            break;
        }
    }
    x
}
