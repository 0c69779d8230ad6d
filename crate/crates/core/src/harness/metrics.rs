//! Accuracy and summary statistics.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Fraction of inliers matched to their ground-truth partner. Outlier rows are ignored.
pub fn accuracy(matching: &[Option<usize>], ground_truth: &[Option<usize>]) -> f64 {
    let inliers = ground_truth.iter().filter(|g| g.is_some()).count();
    if inliers == 0 {
        return 0.0;
    }
    let correct = ground_truth
        .iter()
        .zip(matching)
        .filter(|(g, m)| g.is_some() && g == m)
        .count();
    correct as f64 / inliers as f64
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && values[idx[end + 1]] == values[idx[k]] {
            end += 1;
        }
        let rank = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            out[i] = rank;
        }
        k = end + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n − 2` degrees of freedom.
    pub p_value: f64,
}

/// Spearman rank correlation with tie correction.
pub fn spearman(x: &[f64], y: &[f64]) -> Spearman {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let n = x.len() as f64;
    let rho = pearson(&ranks(x), &ranks(y));
    if !rho.is_finite() || n < 3.0 {
        return Spearman {
            rho: if rho.is_finite() { rho } else { 0.0 },
            p_value: 1.0,
        };
    }
    let df = n - 2.0;
    if rho.abs() >= 1.0 {
        return Spearman { rho, p_value: 0.0 };
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    Spearman {
        rho,
        p_value: 2.0 * (1.0 - dist.cdf(t.abs())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let gt: Vec<Option<usize>> = (0..20).map(Some).chain([None, None]).collect();
        assert_eq!(accuracy(&gt, &gt), 1.0);
        assert_eq!(accuracy(&[None; 22], &gt), 0.0);
        let half: Vec<Option<usize>> = (0..22)
            .map(|i| if i < 10 { Some(i) } else { Some((i + 1) % 22) })
            .collect();
        assert_eq!(accuracy(&half, &gt), 0.5);
    }

    #[test]
    fn spearman_reference_values() {
        // scipy.stats.spearmanr([1,2,3,4,5], [5,6,7,8,7]) → rho 0.8207826816681233, p 0.0885870053135438
        let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[5.0, 6.0, 7.0, 8.0, 7.0]);
        assert!((s.rho - 0.8207826816681233).abs() < 1e-12);
        assert!((s.p_value - 0.0885870053135438).abs() < 1e-9);
        let s = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        assert_eq!(s.rho, -1.0);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
    }
}
