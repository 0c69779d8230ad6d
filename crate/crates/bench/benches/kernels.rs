use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlgm_core::affinity::integrate_layers;
use mlgm_core::baseline::{build_single_layer, spectral_match};
use mlgm_core::factorization::{build_coupling, DEFAULT_SVD_TOL};
use mlgm_core::objective::{f_gm, QuadraticModel};
use mlgm_core::solver::hungarian;
use mlgm_core::solver::path::{initial_state, inner_solve};
use mlgm_core::{
    build_factorized_problem, generate_synthetic_pair, solve_mlfgm, LayerConfidence, MatchingProblem, ObjectiveContext,
    SolverConfig, SyntheticParams,
};

fn table_problem() -> MatchingProblem {
    let params = SyntheticParams {
        deformation: 0.1,
        seed: 1,
        ..Default::default()
    };
    generate_synthetic_pair(&params).unwrap().problem(&params).unwrap()
}

fn hungarian_bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let profit = DMatrix::from_fn(22, 22, |_, _| rng.random::<f64>());
    c.bench_function("hungarian 22x22", |b| b.iter(|| hungarian(&profit).unwrap()));
}

fn factorization_bench(c: &mut Criterion) {
    let p = table_problem();
    c.bench_function("factorize N=22 L=5", |b| {
        b.iter(|| build_factorized_problem(&p, DEFAULT_SVD_TOL).unwrap())
    });
}

fn objective_bench(c: &mut Criterion) {
    let p = table_problem();
    let fp = build_factorized_problem(&p, DEFAULT_SVD_TOL).unwrap();
    let n = fp.n;
    let x = DMatrix::from_element(n, n, 1.0 / n as f64);
    let ctx = ObjectiveContext::new(&fp, LayerConfidence::uniform(fp.n_layers), 0.5).unwrap();
    c.bench_function("f_gm traces N=22 L=5", |b| b.iter(|| f_gm(&x, &ctx).unwrap()));

    let model = QuadraticModel::new(&fp);
    let lc = LayerConfidence::uniform(fp.n_layers);
    let coupling = build_coupling(&lc, &fp.incidences.layers).unwrap();
    c.bench_function("weighted model N=22 L=5", |b| b.iter(|| model.weighted(&lc, &coupling)));
    let w = model.weighted(&lc, &coupling);
    c.bench_function("f_gm lawler N=22 L=5", |b| b.iter(|| w.f_gm(&x)));
}

fn frank_wolfe_bench(c: &mut Criterion) {
    let p = table_problem();
    let fp = build_factorized_problem(&p, DEFAULT_SVD_TOL).unwrap();
    let model = QuadraticModel::new(&fp);
    let lc = LayerConfidence::uniform(fp.n_layers);
    let w = model.weighted(&lc, &build_coupling(&lc, &fp.incidences.layers).unwrap());
    let cfg = SolverConfig::default();
    let opts = mlgm_core::solver::FwOptions {
        max_iters: 20,
        ..cfg.fw_options()
    };
    c.bench_function("away-step FW 20 iterations N=22", |b| {
        b.iter_batched(
            || initial_state(fp.n, cfg.variant).unwrap(),
            |(x, mut active)| inner_solve(&w.at_theta(0.5), &x, &mut active, &opts).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn spectral_bench(c: &mut Criterion) {
    let p = table_problem();
    let single = build_single_layer(&integrate_layers(&p.affinities).unwrap(), &p.intra1, &p.intra2).unwrap();
    c.bench_function("spectral match N=22", |b| b.iter(|| spectral_match(&single).unwrap()));
}

fn solve_bench(c: &mut Criterion) {
    let params = SyntheticParams {
        n_inliers: 8,
        n_outliers: 0,
        n_attributes: 3,
        deformation: 0.05,
        seed: 2,
        ..Default::default()
    };
    let p = generate_synthetic_pair(&params).unwrap().problem(&params).unwrap();
    let fp = build_factorized_problem(&p, DEFAULT_SVD_TOL).unwrap();
    let cfg = SolverConfig {
        theta_step: 0.05,
        ..Default::default()
    };
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    g.bench_function("mlfgm N=8 L=3", |b| b.iter(|| solve_mlfgm(&fp, &cfg).unwrap()));
    g.finish();
}

criterion_group!(
    benches,
    hungarian_bench,
    factorization_bench,
    objective_bench,
    frank_wolfe_bench,
    spectral_bench,
    solve_bench
);
criterion_main!(benches);
