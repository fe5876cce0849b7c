//! Friedman test and Nemenyi post-hoc critical difference for comparing
//! classifiers over many cases.

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Studentized-range-based q constants at α = 0.05 for k = 2..=20 methods
/// (q_{0.05,k} / √2, the form used by the Nemenyi critical difference).
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];

#[derive(Debug, Clone)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Mean rank per method (row of the input table); 1 = best.
    pub mean_ranks: Vec<f64>,
}

/// Ranks one case's accuracies: rank 1 for the highest value, ties get the
/// average of the ranks they span.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .expect("accuracies are comparable")
    });
    let mut ranks = vec![0.0; k];
    let mut pos = 0;
    while pos < k {
        let mut end = pos + 1;
        while end < k && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        // Positions pos..end hold an equal-value block; ranks are 1-based.
        let avg = (pos + 1..=end).map(|r| r as f64).sum::<f64>() / (end - pos) as f64;
        for &idx in &order[pos..end] {
            ranks[idx] = avg;
        }
        pos = end;
    }
    ranks
}

/// Friedman test over an accuracy table with one row per method and one
/// column per case. Identical columns are legitimate (everyone ties) and
/// yield statistic 0, p = 1.
pub fn friedman_test(table: &DMatrix<f64>) -> Result<FriedmanResult> {
    let k = table.nrows();
    let n = table.ncols();
    if k < 3 {
        return Err(Error::invalid(format!(
            "Friedman test needs ≥ 3 methods, got {k}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "Friedman test needs ≥ 2 cases, got {n}"
        )));
    }
    let mut mean_ranks = vec![0.0; k];
    let mut case = vec![0.0; k];
    for j in 0..n {
        for i in 0..k {
            case[i] = table[(i, j)];
        }
        for (i, r) in rank_descending(&case).into_iter().enumerate() {
            mean_ranks[i] += r;
        }
    }
    for r in &mut mean_ranks {
        *r /= n as f64;
    }

    let kf = k as f64;
    let nf = n as f64;
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic =
        (12.0 * nf / (kf * (kf + 1.0))) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    // Ties can push the raw statistic a hair below zero.
    let statistic = statistic.max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("k ≥ 3 gives positive degrees of freedom");
    let p_value = (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0);
    Ok(FriedmanResult {
        statistic,
        p_value,
        mean_ranks,
    })
}

/// Nemenyi critical difference at α = 0.05: two methods differ
/// significantly when their mean ranks differ by more than this.
pub fn nemenyi_cd(k: usize, cases: usize, alpha: f64) -> Result<f64> {
    if (alpha - 0.05).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "only α = 0.05 is supported (q constants are embedded), got {alpha}"
        )));
    }
    if !(2..=20).contains(&k) {
        return Err(Error::invalid(format!(
            "q constants cover 2..=20 methods, got {k}"
        )));
    }
    if cases == 0 {
        return Err(Error::invalid("need at least one case"));
    }
    let q = Q_05[k - 2];
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * cases as f64)).sqrt())
}
