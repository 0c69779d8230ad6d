mod common;

use common::*;
use mlgm_core::affinity::KernelConfig;
use mlgm_core::factorization::{assemble_dense_supra, DENSE_SUPRA_LIMIT};
use mlgm_core::objective::f_con;
use mlgm_core::oracle::{direct_supra, random_permutation, random_problem, RandomProblemSpec};
use mlgm_core::problem::pad_with_dummies;
use mlgm_core::{Assignment, LayerConfidence, MatchingProblem, MultiLayerGraph, ObjectiveContext};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn dense_supra_matches_direct_placement() {
    let mut rng = rng(31);
    for _ in 0..60 {
        let p = random_square(&mut rng, 6, 3, true);
        if p.n_layers * p.n1() * p.n2() > DENSE_SUPRA_LIMIT {
            continue;
        }
        let a = assemble_dense_supra(&factorize(&p)).unwrap();
        let b = direct_supra(&p).unwrap();
        assert!((a - b).abs().max() <= 1e-10);
    }
}

#[test]
fn dense_supra_trivial_cases() {
    let mut rng = rng(32);
    let mut p = random_square(&mut rng, 4, 2, true);
    for block in p
        .affinities
        .unary
        .iter_mut()
        .chain(&mut p.affinities.intra)
        .chain(&mut p.affinities.inter)
    {
        block.fill(0.0);
    }
    let fp = factorize(&p);
    assert_eq!(fp.intra_rank(), 0);
    assert!(assemble_dense_supra(&fp).unwrap().iter().all(|&v| v == 0.0));

    let mut spec = RandomProblemSpec::square(1, 1);
    spec.unary = true;
    let p = random_problem(&spec, &mut rng);
    let k = p.affinities.unary[0][(0, 0)];
    assert_eq!(
        assemble_dense_supra(&factorize(&p)).unwrap(),
        DMatrix::from_element(1, 1, k)
    );
}

#[test]
fn dense_supra_refuses_large_problems() {
    let mut rng = rng(33);
    let p = random_problem(&RandomProblemSpec::square(9, 3), &mut rng);
    assert!(matches!(
        assemble_dense_supra(&factorize(&p)),
        Err(mlgm_core::Error::TooLarge { .. })
    ));
}

#[test]
fn factor_shapes_and_reconstruction() {
    let mut rng = rng(34);
    let mut spec = RandomProblemSpec::square(4, 2);
    spec.edge_density = 1.0;
    let p = random_problem(&spec, &mut rng);
    let fp = factorize(&p);
    assert_eq!(fp.a1.len(), fp.intra_rank());
    assert!(fp.a1.iter().all(|a| a.shape() == (4, 4)));
    assert!(fp.a2.iter().all(|row| row.len() == 2));
    assert!(fp.b2.iter().all(|row| row.len() == 2));
    let ki = fp.intra_factors.reconstruct();
    assert!((&ki - &fp.intra).norm() <= 1e-9 * fp.intra.norm());
    let kt = fp.inter_factors.reconstruct();
    assert!((&kt - &fp.inter).norm() <= 1e-9 * fp.inter.norm());

    let p1 = random_problem(&RandomProblemSpec::square(4, 1), &mut rng);
    let fp1 = factorize(&p1);
    assert!(fp1.b1.is_empty() && fp1.b2.is_empty());
}

#[test]
fn hadamard_trace_identity() {
    // tr((u vᵀ)ᵀ (A ∘ B)) = tr(diag(u) A diag(v) Bᵀ)
    let mut rng = rng(35);
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..7), rng.random_range(1..7));
        let u: DVector<f64> = DVector::from_fn(r, |_, _| rng.random_range(-1.0..1.0));
        let v: DVector<f64> = DVector::from_fn(c, |_, _| rng.random_range(-1.0..1.0));
        let a: DMatrix<f64> = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let lhs = ((&u * v.transpose()).transpose() * a.component_mul(&b)).trace();
        let rhs = (DMatrix::from_diagonal(&u) * &a * DMatrix::from_diagonal(&v) * b.transpose()).trace();
        assert!((lhs - rhs).abs() <= 1e-12);
    }
}

fn complete_graph_problem(n: usize, layers: usize, rng: &mut impl Rng) -> MatchingProblem {
    let edges = MultiLayerGraph::complete_edges(n);
    let graph = |rng: &mut dyn rand::RngCore| {
        let ea = (0..layers)
            .map(|_| (0..edges.len()).map(|_| vec![rng.random::<f64>()]).collect())
            .collect();
        let va = (0..layers).map(|_| vec![vec![0.0]; n]).collect();
        MultiLayerGraph::new(n, edges.clone(), va, ea).unwrap()
    };
    let (g1, g2) = (graph(rng), graph(rng));
    let omegas = (0..layers).map(|_| rng.random_range(0.1..1.0)).collect();
    MatchingProblem::from_graphs(&g1, &g2, &KernelConfig::new(omegas)).unwrap()
}

#[test]
fn kernel_rank_collapses_for_small_omega() {
    // (1−ω) + ω(r1−r2) ≥ 0 for ω ≤ ½, so the kernel factors as f(r1)·g(r2)
    let mut rng = rng(39);
    let edges = MultiLayerGraph::complete_edges(5);
    let graph = |rng: &mut dyn rand::RngCore| {
        let ea = vec![(0..edges.len()).map(|_| vec![rng.random::<f64>()]).collect()];
        MultiLayerGraph::new(5, edges.clone(), vec![vec![vec![0.0]; 5]], ea).unwrap()
    };
    let (g1, g2) = (graph(&mut rng), graph(&mut rng));
    let low = MatchingProblem::from_graphs(&g1, &g2, &KernelConfig::new(vec![0.4])).unwrap();
    let high = MatchingProblem::from_graphs(&g1, &g2, &KernelConfig::new(vec![0.95])).unwrap();
    assert_eq!(factorize(&low).intra_rank(), 1);
    assert!(factorize(&high).intra_rank() > 10);
}

#[test]
fn stored_scalar_count_matches_formula() {
    let mut rng = rng(36);
    for n in [3usize, 4, 5, 6] {
        for layers in [1usize, 2, 3, 4] {
            let fp = factorize(&complete_graph_problem(n, layers, &mut rng));
            let m = n * (n - 1);
            let blocks = layers * (layers - 1);
            let (ri, rt) = (fp.intra_rank(), fp.inter_rank());
            assert!(ri >= 1 && ri <= m);
            assert_eq!(rt, usize::from(layers > 1), "constant coupling has rank one");
            let nn = n * n;
            let expect = nn * layers                       // K_p
                + m * m * layers                           // K_qi
                + n * n * blocks                           // K_qt
                + m * ri + m * layers * ri                 // U, V
                + n * rt + n * blocks * rt                 // S, T
                + ri * nn * (1 + layers)                   // A1, A2
                + rt * nn * (1 + blocks)                   // B1, B2
                + 2 * (2 * m + 2 * n)                      // edge incidences
                + 2 * (layers + blocks); // layer incidences
            assert_eq!(fp.stored_scalars(), expect);
            assert_eq!(fp.dense_supra_scalars(), (layers * nn).pow(2));
        }
    }
}

#[test]
fn storage_grows_linearly_in_layers_while_dense_grows_quadratically() {
    let mut rng = rng(37);
    let n = 6;
    let small = factorize(&complete_graph_problem(n, 2, &mut rng));
    let large = factorize(&complete_graph_problem(n, 8, &mut rng));
    let stored = large.stored_scalars() as f64 / small.stored_scalars() as f64;
    let dense = large.dense_supra_scalars() as f64 / small.dense_supra_scalars() as f64;
    assert_eq!(dense, 16.0);
    // linear in N_L up to the small N²·N_L² inter-layer part
    assert!(stored < 8.0, "stored ratio {stored}");
    assert!(large.stored_scalars() < large.dense_supra_scalars());
}

#[test]
fn padding_examples() {
    let mut rng = rng(38);
    let p = random_problem(&RandomProblemSpec::square(5, 2), &mut rng);
    let (same, map) = pad_with_dummies(&p);
    assert!(map.is_identity());
    assert_eq!(same, p);

    let spec = RandomProblemSpec {
        n1: 4,
        n2: 6,
        n_layers: 2,
        edge_density: 0.7,
        unary: true,
        random_inter_edges: false,
    };
    let p = random_problem(&spec, &mut rng);
    let (padded, map) = pad_with_dummies(&p);
    assert_eq!(map.padded_size(), 6);
    assert_eq!(padded.n1(), 6);
    for block in &padded.affinities.unary {
        assert_eq!(block.shape(), (6, 6));
        assert!(block.rows(4, 2).iter().all(|&v| v == 0.0));
    }
    let fp = factorize(&p);
    let ctx = ObjectiveContext::new(&fp, LayerConfidence::uniform(2), 0.5).unwrap();
    let vals: Vec<f64> = (0..20)
        .map(|_| {
            f_con(
                &Assignment::from_permutation(&random_permutation(6, &mut rng)).into_matrix(),
                &ctx,
            )
            .unwrap()
        })
        .collect();
    let (lo, hi) = vals
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi - lo <= 1e-9 * hi.max(1.0));
    let x = DMatrix::from_element(6, 6, 0.5);
    assert_eq!(map.strip(&x).shape(), (4, 6));
}
