//! Chi-square feature ranking, the preprocessing step that orders features
//! by association with the class before the weakened feature subsets are
//! cut.
//!
//! Every feature is binarized — a column with at most two distinct values
//! splits on nonzero vs zero, anything else splits at its median — and
//! scored by the chi-square statistic of the 2 × q contingency table
//! against the class. Ranking uses all labels once, as a dataset-level
//! preprocessing pass outside the cross-validation loop.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Ranking outcome: `order[0]` is the most associated feature.
#[derive(Debug, Clone)]
pub struct Chi2Ranking {
    /// Feature indices, most significant first; ties broken by index.
    pub order: Vec<usize>,
    /// Chi-square statistic per original feature index.
    pub statistics: Vec<f64>,
}

/// Ranks all feature columns by chi-square association with the labels.
pub fn chi2_rank(features: &DMatrix<f64>, labels: &[usize]) -> Result<Chi2Ranking> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::invalid("no rows to rank features on"));
    }
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    let q = labels.iter().copied().max().map_or(0, |m| m + 1);
    let m = features.ncols();

    let mut statistics = Vec::with_capacity(m);
    let mut column = vec![0.0; n];
    for j in 0..m {
        for i in 0..n {
            column[i] = features[(i, j)];
        }
        statistics.push(chi2_statistic(&column, labels, q));
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        statistics[b]
            .partial_cmp(&statistics[a])
            .expect("chi-square statistics are finite")
            .then(a.cmp(&b))
    });
    Ok(Chi2Ranking { order, statistics })
}

fn chi2_statistic(column: &[f64], labels: &[usize], q: usize) -> f64 {
    let n = column.len();
    let mut distinct: Vec<f64> = column.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
    distinct.dedup();

    let binarized: Vec<bool> = if distinct.len() <= 2 {
        column.iter().map(|&v| v != 0.0).collect()
    } else {
        let mut sorted: Vec<f64> = column.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        column.iter().map(|&v| v > median).collect()
    };

    // 2 × q contingency of the binarized feature against the class.
    let mut counts = vec![[0usize; 2]; q];
    for (b, &c) in binarized.iter().zip(labels) {
        counts[c][usize::from(*b)] += 1;
    }
    let row_total = [
        counts.iter().map(|r| r[0]).sum::<usize>() as f64,
        counts.iter().map(|r| r[1]).sum::<usize>() as f64,
    ];
    let total = n as f64;
    let mut stat = 0.0;
    for class_counts in &counts {
        let col_total = (class_counts[0] + class_counts[1]) as f64;
        for side in 0..2 {
            let expected = row_total[side] * col_total / total;
            if expected > 0.0 {
                let observed = class_counts[side] as f64;
                stat += (observed - expected).powi(2) / expected;
            }
        }
    }
    stat
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn class_indicator_scores_maximally() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let mut x = DMatrix::zeros(40, 3);
        for i in 0..40 {
            x[(i, 1)] = labels[i] as f64; // perfect association
            x[(i, 2)] = (i % 3) as f64; // weak
        }
        let ranking = chi2_rank(&x, &labels).unwrap();
        assert_eq!(ranking.order[0], 1);
        // A 2×2 table with perfect association reaches the ceiling n.
        assert_relative_eq!(ranking.statistics[1], 40.0);
    }

    #[test]
    fn constant_feature_scores_zero_and_ranks_last() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = DMatrix::from_fn(30, 4, |_, _| rng.gen::<f64>());
        for i in 0..30 {
            x[(i, 2)] = 7.5;
        }
        let ranking = chi2_rank(&x, &labels).unwrap();
        assert_eq!(ranking.statistics[2], 0.0);
        assert_eq!(*ranking.order.last().unwrap(), 2);
    }

    #[test]
    fn independent_feature_stays_under_extreme_quantile() {
        let n = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let x = DMatrix::from_fn(n, 1, |_, _| rng.gen::<f64>());
        let ranking = chi2_rank(&x, &labels).unwrap();
        let cutoff = ChiSquared::new(1.0).unwrap().inverse_cdf(0.999);
        assert!(
            ranking.statistics[0] < cutoff,
            "independent feature scored {} ≥ {cutoff}",
            ranking.statistics[0]
        );
    }

    #[test]
    fn continuous_feature_binarizes_at_median() {
        // Feature below/above its median tracks the class exactly even
        // though raw values never repeat and are all nonzero.
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let x = DMatrix::from_fn(20, 1, |i, _| 1.0 + i as f64 * 0.1);
        let ranking = chi2_rank(&x, &labels).unwrap();
        assert_relative_eq!(ranking.statistics[0], 20.0);
    }

    #[test]
    fn ties_order_by_feature_index() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let mut x = DMatrix::zeros(10, 3);
        for i in 0..10 {
            // Columns 0 and 2 identical, column 1 constant.
            x[(i, 0)] = labels[i] as f64;
            x[(i, 2)] = labels[i] as f64;
        }
        let ranking = chi2_rank(&x, &labels).unwrap();
        assert_eq!(ranking.order, vec![0, 2, 1]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let x = DMatrix::zeros(4, 2);
        assert!(chi2_rank(&x, &[0, 1]).is_err());
        let empty = DMatrix::zeros(0, 2);
        assert!(chi2_rank(&empty, &[]).is_err());
    }
}
