#![allow(dead_code)]

use mlgm_core::factorization::{build_factorized_problem, FactorizedProblem, DEFAULT_SVD_TOL};
use mlgm_core::oracle::{random_problem, RandomProblemSpec};
use mlgm_core::{LayerConfidence, MatchingProblem};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn factorize(p: &MatchingProblem) -> FactorizedProblem {
    build_factorized_problem(p, DEFAULT_SVD_TOL).unwrap()
}

/// Random square problem with `n ≤ max_n`, `N_L ≤ max_layers`.
pub fn random_square(rng: &mut ChaCha8Rng, max_n: usize, max_layers: usize, unary: bool) -> MatchingProblem {
    let mut spec = RandomProblemSpec::square(rng.random_range(1..=max_n), rng.random_range(1..=max_layers));
    spec.unary = unary;
    spec.edge_density = rng.random_range(0.2..1.0);
    spec.random_inter_edges = rng.random_bool(0.3);
    random_problem(&spec, rng)
}

/// Random confidence vector, not necessarily normalized.
pub fn random_confidence(n_layers: usize, rng: &mut ChaCha8Rng) -> LayerConfidence {
    LayerConfidence::new((0..n_layers).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
}

pub fn random_x(n1: usize, n2: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n1, n2, |_, _| rng.random::<f64>())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
