//! Linear assignment by shortest augmenting paths, `O(n³)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum-profit permutation of a square (or zero-padded rectangular) matrix.
///
/// Returns `perm` with row `i` assigned to column `perm[i]`, over the padded
/// `max(rows, cols)` square. Among optimal permutations the lexicographically
/// smallest is returned: row 0 gets the lowest feasible column, then row 1, …
pub fn hungarian(profit: &DMatrix<f64>) -> Result<Vec<usize>> {
    if profit.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assignment profit matrix"));
    }
    let n = profit.nrows().max(profit.ncols());
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = profit.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cost = DMatrix::from_fn(n, n, |i, j| {
        if i < profit.nrows() && j < profit.ncols() {
            -profit[(i, j)]
        } else {
            0.0
        }
    });
    let (mut perm, u, v) = shortest_augmenting_path(&cost);
    lexicographic_tie_break(&cost, &u, &v, &mut perm, 1e-10 * (1.0 + scale));
    Ok(perm)
}

/// Row-to-column matching for a rectangular matrix; rows matched to padding get `None`.
pub fn hungarian_matching(profit: &DMatrix<f64>) -> Result<Vec<Option<usize>>> {
    let cols = profit.ncols();
    Ok(hungarian(profit)?
        .into_iter()
        .take(profit.nrows())
        .map(|j| (j < cols).then_some(j))
        .collect())
}

/// Total profit of a permutation, ignoring padded positions.
pub fn assignment_score(profit: &DMatrix<f64>, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .filter(|&(i, &j)| i < profit.nrows() && j < profit.ncols())
        .map(|(i, &j)| profit[(i, j)])
        .sum()
}

/// Permutation matrix with `x[(i, perm[i])] = 1`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    let mut x = DMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        x[(i, j)] = 1.0;
    }
    x
}

/// Minimum-cost assignment with the final dual potentials `u`, `v`
/// (`cost[i][j] ≥ u[i] + v[j]`, equality on the assignment).
fn shortest_augmenting_path(cost: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = cost.nrows();
    // 1-based internally; index 0 is the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    (perm, u[1..].to_vec(), v[1..].to_vec())
}

/// Every optimal assignment lives on the tight edges of an optimal dual, so
/// the lexicographically smallest one is found by fixing rows in order and
/// re-routing the rest along alternating paths of tight edges.
fn lexicographic_tie_break(cost: &DMatrix<f64>, u: &[f64], v: &[f64], perm: &mut [usize], tol: f64) {
    let n = perm.len();
    let tight = |i: usize, j: usize| cost[(i, j)] - u[i] - v[j] <= tol;
    let mut owner = vec![0; n];
    for (i, &j) in perm.iter().enumerate() {
        owner[j] = i;
    }
    for i in 0..n {
        for j in 0..perm[i] {
            let r = owner[j];
            if r < i || !tight(i, j) {
                continue;
            }
            // row r must move; the column released by row i is the target
            let target = perm[i];
            let mut visited = vec![false; n];
            visited[j] = true;
            let mut path = Vec::new();
            if reroute(r, i, target, perm, &owner, &tight, &mut visited, &mut path) {
                perm[i] = j;
                owner[j] = i;
                for (row, col) in path {
                    perm[row] = col;
                    owner[col] = row;
                }
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn reroute(
    row: usize,
    fixed: usize,
    target: usize,
    perm: &[usize],
    owner: &[usize],
    tight: &impl Fn(usize, usize) -> bool,
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for c in 0..perm.len() {
        if visited[c] || !tight(row, c) {
            continue;
        }
        visited[c] = true;
        if c == target {
            path.push((row, c));
            return true;
        }
        let next = owner[c];
        if next > fixed && reroute(next, fixed, target, perm, owner, tight, visited, path) {
            path.push((row, c));
            return true;
        }
    }
    false
}
