//! Feature weakening: nested subsets of the top chi-square-ranked
//! features, used to probe how methods degrade as feature information
//! thins out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::io::DatasetBundle;

use super::chi2::Chi2Ranking;

/// Sizes of the weakened feature sets, smallest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSetSpec {
    pub sizes: Vec<usize>,
}

impl Default for FeatureSetSpec {
    fn default() -> Self {
        FeatureSetSpec {
            sizes: vec![5, 10, 25, 50, 100],
        }
    }
}

impl FeatureSetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::invalid("no feature-set sizes"));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "feature-set sizes must be strictly increasing",
            ));
        }
        if self.sizes[0] == 0 {
            return Err(Error::invalid("feature-set sizes must be positive"));
        }
        Ok(())
    }
}

/// One weakened dataset: the label ("5F", "10F", …) and the bundle
/// restricted to that many top-ranked features.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub label: String,
    pub size: usize,
    pub bundle: DatasetBundle,
}

/// Cuts the nested subsets. Sizes beyond the available feature count are
/// dropped with a warning (the largest feasible set is kept), so a
/// 60-feature dataset yields 5F..50F.
pub fn build_feature_sets(
    bundle: &DatasetBundle,
    ranking: &Chi2Ranking,
    spec: &FeatureSetSpec,
) -> Result<Vec<FeatureSet>> {
    spec.validate()?;
    let m = bundle.n_features();
    if m == 0 {
        return Err(Error::invalid("dataset has no features to weaken"));
    }
    if ranking.order.len() != m {
        return Err(Error::invalid(format!(
            "ranking covers {} features, dataset has {m}",
            ranking.order.len()
        )));
    }
    let feasible: Vec<usize> = spec.sizes.iter().copied().filter(|&s| s <= m).collect();
    if feasible.len() < spec.sizes.len() {
        log::warn!(
            "only {m} features available; truncating feature sets to {:?}",
            feasible
        );
    }
    if feasible.is_empty() {
        return Err(Error::invalid(format!(
            "dataset has {m} features, fewer than the smallest requested set ({})",
            spec.sizes[0]
        )));
    }
    let mut out = Vec::with_capacity(feasible.len());
    for size in feasible {
        // Top `size` ranked features, presented in original column order.
        let mut cols: Vec<usize> = ranking.order[..size].to_vec();
        cols.sort_unstable();
        out.push(FeatureSet {
            label: format!("{size}F"),
            size,
            bundle: bundle.with_feature_columns(&cols),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::harness::chi2::chi2_rank;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn bundle_with_features(m: usize, seed: u64) -> DatasetBundle {
        let n = 30;
        let graph = Graph::from_unit_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>());
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = DMatrix::from_fn(n, m, |i, j| {
            // Informativeness decays with column index.
            let signal = if j < m / 2 { labels[i] as f64 } else { 0.0 };
            signal * (1.0 - j as f64 / m as f64) + rng.gen::<f64>() * 0.3
        });
        DatasetBundle {
            name: "w".into(),
            graph,
            features,
            labels,
            class_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn five_nested_sets_from_wide_input() {
        let bundle = bundle_with_features(120, 1);
        let ranking = chi2_rank(&bundle.features, &bundle.labels).unwrap();
        let sets = build_feature_sets(&bundle, &ranking, &FeatureSetSpec::default()).unwrap();
        assert_eq!(
            sets.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
            vec!["5F", "10F", "25F", "50F", "100F"]
        );
        for s in &sets {
            assert_eq!(s.bundle.n_features(), s.size);
            assert_eq!(s.bundle.n(), 30);
        }
    }

    #[test]
    fn sets_are_nested() {
        let bundle = bundle_with_features(120, 2);
        let ranking = chi2_rank(&bundle.features, &bundle.labels).unwrap();
        let sets = build_feature_sets(&bundle, &ranking, &FeatureSetSpec::default()).unwrap();
        // Nesting is about which original features appear; recover each
        // set's columns from the ranking prefix it was built from.
        let mut prev: BTreeSet<usize> = BTreeSet::new();
        for s in &sets {
            let cols: BTreeSet<usize> = ranking.order[..s.size].iter().copied().collect();
            assert!(prev.is_subset(&cols), "{}F not nested", s.size);
            prev = cols;
        }
    }

    #[test]
    fn sixty_features_truncate_to_fifty() {
        let bundle = bundle_with_features(60, 3);
        let ranking = chi2_rank(&bundle.features, &bundle.labels).unwrap();
        let sets = build_feature_sets(&bundle, &ranking, &FeatureSetSpec::default()).unwrap();
        assert_eq!(sets.last().unwrap().label, "50F");
        assert_eq!(sets.len(), 4);
    }

    #[test]
    fn degenerate_specs_rejected() {
        let bundle = bundle_with_features(10, 4);
        let ranking = chi2_rank(&bundle.features, &bundle.labels).unwrap();
        let bad = FeatureSetSpec {
            sizes: vec![10, 5],
        };
        assert!(build_feature_sets(&bundle, &ranking, &bad).is_err());
        let too_small = FeatureSetSpec { sizes: vec![50] };
        assert!(build_feature_sets(&bundle, &ranking, &too_small).is_err());
        assert!(FeatureSetSpec { sizes: vec![] }.validate().is_err());
    }
}
