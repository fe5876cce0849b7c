//! Nested cross-validation planning: runs × external folds × inner folds,
//! stratified and fully determined by the seed.
//!
//! Each run shuffles the nodes into `external_folds` stratified folds. In
//! turn, every external fold plays the labeled set (the 20% labeling rate)
//! while the remaining folds form the test set; the labeled set is further
//! split into `inner_folds` stratified folds for hyperparameter tuning.
//! An assignment that leaves some class absent from an external fold is
//! re-drawn, up to a bounded number of attempts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::mix_seed;

/// Attempts at a stratified assignment covering every class before the
/// plan fails.
const MAX_DRAW_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvParams {
    pub runs: usize,
    pub external_folds: usize,
    pub inner_folds: usize,
    /// Fraction of nodes labeled per split; must equal 1/external_folds.
    pub labeling_rate: f64,
}

impl Default for CvParams {
    fn default() -> Self {
        CvParams {
            runs: 5,
            external_folds: 5,
            inner_folds: 5,
            labeling_rate: 0.20,
        }
    }
}

/// One labeled/test split with the inner tuning folds of the labeled set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub labeled: Vec<usize>,
    pub test: Vec<usize>,
    /// Partition of `labeled` into inner validation folds.
    pub inner: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvRun {
    pub folds: Vec<FoldSplit>,
}

/// A realized plan: `runs[r].folds[f]` is external fold f of run r acting
/// as the labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub params: CvParams,
    pub seed: u64,
    pub runs: Vec<CvRun>,
}

/// Builds the full plan for a dataset's label vector.
pub fn make_cv_plan(labels: &[usize], params: &CvParams, seed: u64) -> Result<CvPlan> {
    let n = labels.len();
    if n < 25 {
        return Err(Error::invalid(format!(
            "{n} nodes is too few for nested cross-validation (need ≥ 25)"
        )));
    }
    if params.runs == 0 || params.external_folds < 2 || params.inner_folds < 2 {
        return Err(Error::invalid(
            "need ≥ 1 run, ≥ 2 external folds and ≥ 2 inner folds",
        ));
    }
    if (params.labeling_rate * params.external_folds as f64 - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "labeling rate {} is inconsistent with {} external folds (each fold is the labeled set in turn)",
            params.labeling_rate, params.external_folds
        )));
    }
    let classes: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };

    let mut runs = Vec::with_capacity(params.runs);
    for run in 0..params.runs {
        let run_seed = mix_seed(seed, run as u64);
        let folds = draw_covering_partition(
            labels,
            &classes,
            params.external_folds,
            run_seed,
        )
        .ok_or_else(|| {
            Error::invalid(format!(
                "could not cover every class in all {} external folds after {MAX_DRAW_ATTEMPTS} stratified draws (run {run}); some class is too rare",
                params.external_folds
            ))
        })?;

        let mut splits = Vec::with_capacity(params.external_folds);
        for f in 0..params.external_folds {
            let labeled = folds[f].clone();
            let mut test: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            test.sort_unstable();

            let inner_seed = mix_seed(run_seed, 0x1717 + f as u64);
            let labeled_labels: Vec<usize> = labeled.iter().map(|&i| labels[i]).collect();
            let inner_local = stratified_partition(
                &labeled_labels,
                params.inner_folds,
                &mut ChaCha8Rng::seed_from_u64(inner_seed),
            );
            let inner: Vec<Vec<usize>> = inner_local
                .into_iter()
                .map(|fold| {
                    let mut ids: Vec<usize> = fold.into_iter().map(|k| labeled[k]).collect();
                    ids.sort_unstable();
                    ids
                })
                .collect();
            splits.push(FoldSplit {
                labeled,
                test,
                inner,
            });
        }
        runs.push(CvRun { folds: splits });
    }
    Ok(CvPlan {
        params: *params,
        seed,
        runs,
    })
}

/// Draws stratified partitions until every fold holds every class.
fn draw_covering_partition(
    labels: &[usize],
    classes: &[usize],
    k: usize,
    run_seed: u64,
) -> Option<Vec<Vec<usize>>> {
    for attempt in 0..MAX_DRAW_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, attempt as u64));
        let folds = stratified_partition(labels, k, &mut rng);
        let covers = folds.iter().all(|fold| {
            classes
                .iter()
                .all(|&c| fold.iter().any(|&i| labels[i] == c))
        });
        if covers {
            return Some(folds);
        }
    }
    None
}

/// Splits indices 0..labels.len() into k folds, dealing each class's
/// shuffled members round-robin; a running offset spreads the remainders
/// across folds. Folds come back sorted.
fn stratified_partition(
    labels: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next = 0usize;
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        for i in members {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced_labels(n: usize, q: usize) -> Vec<usize> {
        (0..n).map(|i| i % q).collect()
    }

    fn assert_partition(parts: &[Vec<usize>], n: usize) {
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn hundred_nodes_give_twenty_labeled() {
        let labels = balanced_labels(100, 4);
        let plan = make_cv_plan(&labels, &CvParams::default(), 7).unwrap();
        assert_eq!(plan.runs.len(), 5);
        for run in &plan.runs {
            assert_eq!(run.folds.len(), 5);
            let folds: Vec<Vec<usize>> = run.folds.iter().map(|s| s.labeled.clone()).collect();
            assert_partition(&folds, 100);
            for split in &run.folds {
                assert_eq!(split.labeled.len(), 20);
                assert_eq!(split.test.len(), 80);
            }
        }
    }

    #[test]
    fn inner_folds_partition_labeled_set() {
        let labels = balanced_labels(100, 4);
        let plan = make_cv_plan(&labels, &CvParams::default(), 3).unwrap();
        for run in &plan.runs {
            for split in &run.folds {
                let mut inner_all: Vec<usize> = split.inner.iter().flatten().copied().collect();
                inner_all.sort_unstable();
                assert_eq!(inner_all, split.labeled);
                assert_eq!(split.inner.len(), 5);
                for fold in &split.inner {
                    assert_eq!(fold.len(), 4);
                }
                // Labeled and test are disjoint and cover everything.
                assert!(split.labeled.iter().all(|i| !split.test.contains(i)));
                assert_eq!(split.labeled.len() + split.test.len(), 100);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_plan() {
        let labels = balanced_labels(60, 3);
        let a = make_cv_plan(&labels, &CvParams::default(), 42).unwrap();
        let b = make_cv_plan(&labels, &CvParams::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = make_cv_plan(&labels, &CvParams::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stratification_balances_classes() {
        // 80/20 imbalance: every external fold should hold 16 of the
        // majority and 4 of the minority.
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 80)).collect();
        let plan = make_cv_plan(&labels, &CvParams::default(), 5).unwrap();
        for run in &plan.runs {
            for split in &run.folds {
                let minority = split.labeled.iter().filter(|&&i| labels[i] == 1).count();
                assert_eq!(minority, 4);
            }
        }
    }

    #[test]
    fn rare_class_fails_after_redraws() {
        // 3 members cannot cover 5 folds, ever.
        let mut labels = balanced_labels(50, 2);
        labels[0] = 2;
        labels[1] = 2;
        labels[2] = 2;
        let err = make_cv_plan(&labels, &CvParams::default(), 1).unwrap_err();
        assert!(err.to_string().contains("too rare"), "{err}");
    }

    #[test]
    fn inconsistent_rate_rejected() {
        let labels = balanced_labels(100, 2);
        let params = CvParams {
            labeling_rate: 0.10,
            ..Default::default()
        };
        assert!(make_cv_plan(&labels, &params, 0).is_err());
        assert!(make_cv_plan(&balanced_labels(20, 2), &CvParams::default(), 0).is_err());
    }
}
