//! Per-layer confidence from the separation of matched and unmatched edge pairs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factorization::FactorizedProblem;
use crate::model::LayerConfidence;
use crate::solver::hungarian::hungarian;

/// `L_Ctrue − L_Cfalse` per layer for the discretization `perm` of the current solution.
///
/// An edge pair `(m1, m2)` is in the true cluster when both endpoints of `m1`
/// map onto those of `m2` under `X`, and in the false cluster when neither
/// does under the complement `1 − X`. Each cluster contributes its mean affinity.
pub fn raw_layer_confidence(problem: &FactorizedProblem, perm: &[usize]) -> Vec<f64> {
    let e1 = &problem.incidences.intra1;
    let e2 = &problem.incidences.intra2;
    problem
        .affinities
        .intra
        .iter()
        .map(|k| {
            let (mut t_sum, mut t_cnt, mut f_sum, mut f_cnt) = (0.0, 0usize, 0.0, 0usize);
            for (m1, (&s1, &t1)) in e1.starts().iter().zip(e1.ends()).enumerate() {
                let (ps, pt) = (perm[s1], perm[t1]);
                for (m2, (&s2, &t2)) in e2.starts().iter().zip(e2.ends()).enumerate() {
                    let v = k[(m1, m2)];
                    if ps == s2 && pt == t2 {
                        t_sum += v;
                        t_cnt += 1;
                    } else if ps != s2 && pt != t2 {
                        f_sum += v;
                        f_cnt += 1;
                    }
                }
            }
            let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
            mean(t_sum, t_cnt) - mean(f_sum, f_cnt)
        })
        .collect()
}

/// Closest point (by iterative clamping) with entries `≥ floor` summing to one.
///
/// Negative raw values are first cut to zero; if nothing positive remains the
/// uniform vector is returned.
pub fn project_confidence(raw: &[f64], floor: f64) -> Result<LayerConfidence> {
    let n = raw.len();
    if n == 0 {
        return Err(Error::InvalidParameter("confidence needs at least one layer".into()));
    }
    if !(0.0..=1.0 / n as f64).contains(&floor) {
        return Err(Error::InvalidParameter(format!(
            "confidence floor {floor} is infeasible for {n} layers"
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw layer confidence"));
    }
    let pos: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    if total <= 0.0 {
        return Ok(LayerConfidence::uniform(n));
    }
    let mut pinned = vec![false; n];
    loop {
        let free_mass: f64 = pos.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(v, _)| v).sum();
        let budget = 1.0 - floor * pinned.iter().filter(|&&p| p).count() as f64;
        let scale = if free_mass > 0.0 { budget / free_mass } else { 0.0 };
        let mut changed = false;
        for i in 0..n {
            if !pinned[i] && pos[i] * scale < floor {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed {
            let values = (0..n).map(|i| if pinned[i] { floor } else { pos[i] * scale }).collect();
            return LayerConfidence::new(values);
        }
    }
}

/// Discretize `x` with the Hungarian method and score every layer.
pub fn layer_confidence(x: &DMatrix<f64>, problem: &FactorizedProblem, floor: f64) -> Result<LayerConfidence> {
    let perm = hungarian(x)?;
    if problem.incidences.intra1.n_edges() == 0 || problem.incidences.intra2.n_edges() == 0 {
        return Ok(LayerConfidence::uniform(problem.n_layers));
    }
    project_confidence(&raw_layer_confidence(problem, &perm), floor)
}
