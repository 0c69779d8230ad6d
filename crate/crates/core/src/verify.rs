//! Self-checks against independent oracles, reported with measured errors.
//!
//! Each check draws its own seeded instances and compares the production code
//! path against a direct construction, an enumeration, or a finite difference.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{brute_force_qap, spectral_match, SingleLayerProblem};
use crate::error::Result;
use crate::factorization::{
    assemble_dense_supra, build_coupling, build_factorized_problem, FactorizedProblem, DEFAULT_SVD_TOL,
};
use crate::harness::io::{problem_from_str, problem_to_string};
use crate::model::LayerConfidence;
use crate::objective::{
    f_cav, f_con, f_gm, f_gm_dense, f_theta, f_vex, grad_f_theta, ObjectiveContext, QuadraticModel, SmoothObjective,
};
use crate::oracle::{
    brute_force_assignment, direct_supra, random_doubly_stochastic, random_permutation, random_problem,
    RandomProblemSpec,
};
use crate::problem::MatchingProblem;
use crate::solver::frank_wolfe::{frank_wolfe_max, FwOptions, FwVariant};
use crate::solver::hungarian::{assignment_score, hungarian, permutation_matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity and the bound it was held to.
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(salt);
    r
}

fn random_square(rng: &mut ChaCha8Rng, max_n: usize, max_layers: usize, unary: bool) -> MatchingProblem {
    let mut spec = RandomProblemSpec::square(rng.random_range(1..=max_n), rng.random_range(1..=max_layers));
    spec.unary = unary;
    spec.edge_density = rng.random_range(0.2..1.0);
    spec.random_inter_edges = rng.random_bool(0.3);
    random_problem(&spec, rng)
}

fn factorize(p: &MatchingProblem) -> Result<FactorizedProblem> {
    build_factorized_problem(p, DEFAULT_SVD_TOL)
}

fn random_confidence(n: usize, rng: &mut ChaCha8Rng) -> LayerConfidence {
    LayerConfidence::new((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).expect("positive weights")
}

fn random_x(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random::<f64>())
}

/// Factorized dense supra-adjacency vs direct block placement, `N ≤ 6`, `N_L ≤ 3`.
pub fn factorization_oracle(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..problems {
        let p = random_square(&mut rng, 6, 3, true);
        let a = assemble_dense_supra(&factorize(&p)?)?;
        let b = direct_supra(&p)?;
        worst = worst.max((a - b).abs().max());
    }
    Ok(check(
        "factorization-oracle",
        worst <= 1e-10,
        format!("max |Δ| = {worst:.3e} over {problems} problems (bound 1e-10)"),
    ))
}

/// Factorized `F_gm` vs `(L_C⊗x)ᵀ P (L_C⊗x)` on the dense supra-adjacency.
///
/// Unary blocks are zero: the dense quadratic form squares the unary term
/// while the factorized form keeps it linear.
pub fn objective_equivalence(seed: u64, pairs: usize) -> Result<Check> {
    let mut rng = rng(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let p = random_square(&mut rng, 5, 3, false);
        let fp = factorize(&p)?;
        let dense = direct_supra(&p)?;
        let lc = random_confidence(p.n_layers, &mut rng);
        let ctx = ObjectiveContext::new(&fp, lc.clone(), 0.5)?;
        let x = random_x(fp.n, &mut rng);
        let d = f_gm_dense(&x, &lc, &dense)?;
        worst = worst.max((f_gm(&x, &ctx)? - d).abs() / d.abs().max(1.0));
    }
    Ok(check(
        "objective-equivalence",
        worst <= 1e-8,
        format!("max relative error {worst:.3e} over {pairs} pairs (bound 1e-8)"),
    ))
}

/// `F_vex + F_cav = 2 F_gm`, `F_θ(½) = F_gm`, and `F_con` constant on permutations.
pub fn relaxation_identities(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 3);
    let (mut sum_err, mut mid_err, mut spread) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..problems {
        let p = random_square(&mut rng, 6, 3, true);
        let fp = factorize(&p)?;
        let ctx = ObjectiveContext::new(&fp, random_confidence(p.n_layers, &mut rng), 0.5)?;
        let x = random_x(fp.n, &mut rng);
        let (gm, vex, cav) = (f_gm(&x, &ctx)?, f_vex(&x, &ctx)?, f_cav(&x, &ctx)?);
        sum_err = sum_err.max(rel_err(vex + cav, 2.0 * gm));
        let average = 0.5 * (vex.abs() + cav.abs());
        mid_err = mid_err.max((f_theta(&x, &ctx)? - gm).abs() / average.max(1.0));
        let cons: Vec<f64> = (0..20)
            .map(|_| f_con(&permutation_matrix(&random_permutation(fp.n, &mut rng)), &ctx))
            .collect::<Result<_>>()?;
        let (lo, hi) = cons
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        spread = spread.max((hi - lo) / hi.abs().max(1.0));
    }
    Ok(check(
        "relaxation-identities",
        sum_err <= 1e-9 && mid_err <= 1e-12 && spread < 1e-9,
        format!(
            "vex+cav vs 2gm {sum_err:.3e} (1e-9), θ=½ vs gm {mid_err:.3e} (1e-12), F_con spread {spread:.3e} (1e-9)"
        ),
    ))
}

/// Hessian of `F_θ` column by column from gradient differences.
fn explicit_hessian(ctx: &ObjectiveContext<'_>) -> Result<DMatrix<f64>> {
    let n = ctx.problem().n;
    let base = grad_f_theta(&DMatrix::zeros(n, n), ctx)?;
    let mut h = DMatrix::zeros(n * n, n * n);
    for k in 0..n * n {
        let mut e = DMatrix::zeros(n, n);
        e[k] = 1.0;
        let g = grad_f_theta(&e, ctx)? - &base;
        h.column_mut(k).copy_from_slice(g.as_slice());
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// `λ_max(H_vex) ≤ 1e-8` and `λ_min(H_cav) ≥ −1e-8` for `N² ≤ 36`.
pub fn definiteness(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 4);
    let (mut vex_max, mut cav_min) = (f64::MIN, f64::MAX);
    for _ in 0..problems {
        let p = random_square(&mut rng, 6, 3, true);
        let fp = factorize(&p)?;
        let mut ctx = ObjectiveContext::new(&fp, random_confidence(p.n_layers, &mut rng), 0.0)?;
        vex_max = vex_max.max(explicit_hessian(&ctx)?.symmetric_eigenvalues().max());
        ctx.set_theta(1.0)?;
        cav_min = cav_min.min(explicit_hessian(&ctx)?.symmetric_eigenvalues().min());
    }
    Ok(check(
        "definiteness",
        vex_max <= 1e-8 && cav_min >= -1e-8,
        format!("λmax(H_vex) = {vex_max:.3e} (≤ 1e-8), λmin(H_cav) = {cav_min:.3e} (≥ -1e-8)"),
    ))
}

/// Analytic gradient vs central differences with `h = 1e-5`.
pub fn gradient_check(seed: u64, instances: usize) -> Result<Check> {
    const H: f64 = 1e-5;
    let mut rng = rng(seed, 5);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let p = random_square(&mut rng, 5, 3, true);
        let fp = factorize(&p)?;
        let ctx = ObjectiveContext::new(&fp, random_confidence(p.n_layers, &mut rng), rng.random())?;
        let x = random_x(fp.n, &mut rng);
        let g = grad_f_theta(&x, &ctx)?;
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += H;
            xm[k] -= H;
            let fd = (f_theta(&xp, &ctx)? - f_theta(&xm, &ctx)?) / (2.0 * H);
            worst = worst.max((g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1.0));
        }
    }
    Ok(check(
        "gradient-check",
        worst < 1e-5,
        format!("max relative component error {worst:.3e} over {instances} instances (bound 1e-5)"),
    ))
}

/// Hungarian optimum vs enumeration of all `6!` permutations.
pub fn hungarian_exactness(seed: u64, matrices: usize) -> Result<Check> {
    let mut rng = rng(seed, 6);
    let mut mismatches = 0;
    for _ in 0..matrices {
        let p = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-10.0..10.0));
        let (_, best) = brute_force_assignment(&p);
        if (assignment_score(&p, &hungarian(&p)?) - best).abs() > 1e-9 * best.abs().max(1.0) {
            mismatches += 1;
        }
    }
    Ok(check(
        "hungarian-exactness",
        mismatches == 0,
        format!("{mismatches} mismatches over {matrices} random 6×6 matrices"),
    ))
}

/// Frank–Wolfe on `F_θ` never decreases the objective and stays doubly stochastic.
pub fn frank_wolfe_feasibility(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 7);
    let (mut drop, mut row_err, mut min_entry) = (0.0f64, 0.0f64, f64::MAX);
    for k in 0..problems {
        let p = random_square(&mut rng, 6, 3, true);
        let fp = factorize(&p)?;
        let model = QuadraticModel::new(&fp);
        let lc = random_confidence(p.n_layers, &mut rng);
        let w = model.weighted(&lc, &build_coupling(&lc, &fp.incidences.layers)?);
        let opts = FwOptions {
            max_iters: 100,
            gap_tol: 1e-9,
            variant: if k % 2 == 0 {
                FwVariant::AwayStep
            } else {
                FwVariant::Plain
            },
        };
        let x0 = random_doubly_stochastic(fp.n, &mut rng);
        let r = frank_wolfe_max(&w.at_theta(rng.random()), &x0, &opts)?;
        for pair in r.trace.windows(2) {
            drop = drop.max((pair[0] - pair[1]) / pair[0].abs().max(1.0));
        }
        for i in 0..fp.n {
            row_err = row_err
                .max((r.x.row(i).sum() - 1.0).abs())
                .max((r.x.column(i).sum() - 1.0).abs());
        }
        min_entry = min_entry.min(r.x.min());
    }
    Ok(check(
        "frank-wolfe-feasibility",
        drop <= 1e-12 && row_err <= 1e-9 && min_entry >= -1e-12,
        format!("largest relative decrease {drop:.3e} (1e-12), marginal error {row_err:.3e} (1e-9), min entry {min_entry:.3e}"),
    ))
}

/// Fast quadratic model vs the term-by-term objective.
pub fn quadratic_model(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 8);
    let mut worst = 0.0f64;
    for _ in 0..problems {
        let p = random_square(&mut rng, 6, 3, true);
        let fp = factorize(&p)?;
        let lc = random_confidence(p.n_layers, &mut rng);
        let theta: f64 = rng.random();
        let ctx = ObjectiveContext::new(&fp, lc.clone(), theta)?;
        let w = QuadraticModel::new(&fp).weighted(&lc, ctx.coupling());
        let x = random_doubly_stochastic(fp.n, &mut rng);
        let view = w.at_theta(theta);
        worst = worst.max(rel_err(view.value(&x), ctx.value(&x)));
        let (ga, gb) = (view.gradient(&x), ctx.gradient(&x));
        worst = worst.max(
            ga.iter()
                .zip(gb.iter())
                .map(|(&a, &b)| rel_err(a, b))
                .fold(0.0, f64::max),
        );
    }
    Ok(check(
        "quadratic-model",
        worst <= 1e-10,
        format!("max relative error {worst:.3e} over {problems} problems (bound 1e-10)"),
    ))
}

/// Spectral matching eigenvector of a nonnegative affinity is nonnegative.
pub fn spectral_nonnegative(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 9);
    let mut min_entry = f64::MAX;
    for _ in 0..problems {
        let (n1, n2) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let d = n1 * n2;
        let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>());
        let k = (&a + a.transpose()) * 0.5;
        let r = spectral_match(&SingleLayerProblem { n1, n2, k })?;
        min_entry = min_entry.min(r.eigenvector.min());
    }
    Ok(check(
        "spectral-nonnegative",
        min_entry >= -1e-9,
        format!("min eigenvector entry {min_entry:.3e} (≥ -1e-9)"),
    ))
}

/// Relabeling graph 2 relabels the exhaustive optimum and keeps its value.
pub fn brute_force_relabel(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 10);
    let mut worst = 0.0f64;
    for _ in 0..problems {
        let p = random_square(&mut rng, 5, 2, true);
        let relabel = random_permutation(p.n2(), &mut rng);
        let q = crate::oracle::relabel_second(&p, &relabel)?;
        let (_, a) = brute_force_qap(&factorize(&p)?)?;
        let (_, b) = brute_force_qap(&factorize(&q)?)?;
        worst = worst.max(rel_err(a, b));
    }
    Ok(check(
        "brute-force-relabel",
        worst <= 1e-10,
        format!("max relative change of the optimum {worst:.3e} (1e-10)"),
    ))
}

/// Text format round trip.
pub fn problem_round_trip(seed: u64, problems: usize) -> Result<Check> {
    let mut rng = rng(seed, 11);
    let mut failures = 0;
    for _ in 0..problems {
        let mut spec = RandomProblemSpec::square(rng.random_range(1..=5), rng.random_range(1..=3));
        spec.n2 = rng.random_range(1..=5);
        spec.unary = true;
        spec.random_inter_edges = rng.random_bool(0.5);
        let p = random_problem(&spec, &mut rng);
        if problem_from_str(&problem_to_string(&p))? != p {
            failures += 1;
        }
    }
    Ok(check(
        "problem-round-trip",
        failures == 0,
        format!("{failures} of {problems} problems changed"),
    ))
}

/// Every check at its default size.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        factorization_oracle(seed, 50)?,
        objective_equivalence(seed, 100)?,
        relaxation_identities(seed, 50)?,
        definiteness(seed, 20)?,
        gradient_check(seed, 20)?,
        hungarian_exactness(seed, 100)?,
        frank_wolfe_feasibility(seed, 20)?,
        quadratic_model(seed, 20)?,
        spectral_nonnegative(seed, 20)?,
        brute_force_relabel(seed, 10)?,
        problem_round_trip(seed, 20)?,
    ])
}
