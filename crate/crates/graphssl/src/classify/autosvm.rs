//! Autocovariate SVM: alternates between training a linear SVM on
//! [features, class autocovariates] and refreshing the autocovariates from
//! the current class memberships.
//!
//! The autocovariate of node i for class c is the membership mass of i's
//! neighbors, ac_ic = Σ_j p_ij m_jc with P the transition matrix. Labeled
//! nodes keep their true one-hot membership throughout; unlabeled
//! memberships start from a feature-only SVM (round 0) and are refreshed
//! each round, by default synchronously and as hard one-hot assignments.
//! The loop stops when no unlabeled prediction changes, when a 2-cycle is
//! detected (keeping the iterate whose model fits the labeled nodes
//! better), or after `max_iter` rounds (flagged, not an error).

use nalgebra::DMatrix;

use crate::error::Result;
use crate::features::{compose_features, compose_features_with_transform};
use crate::graph::io::DatasetBundle;
use crate::graph::TransitionView;
use crate::svm::LinearSvmModel;

use super::{predict_rows_subset, train_on_rows, ClassifyTask};

#[derive(Debug, Clone, Copy)]
pub struct AutoSvmOptions {
    /// Autocovariate rounds after the feature-only round 0.
    pub max_iter: usize,
    /// Update unlabeled nodes one at a time in ascending order, each seeing
    /// the refreshed memberships of earlier nodes, instead of all at once.
    pub sequential_updates: bool,
    /// Use one-vs-one vote shares as memberships instead of hard one-hot.
    pub soft_memberships: bool,
}

impl Default for AutoSvmOptions {
    fn default() -> Self {
        AutoSvmOptions {
            max_iter: 50,
            sequential_updates: false,
            soft_memberships: false,
        }
    }
}

/// What happened during the iteration, for callers that want to inspect
/// convergence behavior.
#[derive(Debug, Clone)]
pub struct AutoSvmTrace {
    /// Autocovariate rounds actually run (round 0 not counted).
    pub iterations: usize,
    /// Unlabeled nodes whose prediction changed, per round.
    pub changes: Vec<usize>,
    /// Reached a fixed point.
    pub converged: bool,
    /// Stopped on an A→B→A oscillation.
    pub cycle_detected: bool,
}

/// Runs the iteration and returns predictions for `task.targets` plus the
/// trace. Round 0 is exactly the feature-only SVM with the same seed, so
/// with `max_iter = 0` this reproduces that baseline.
pub fn autosvm_classify(
    bundle: &DatasetBundle,
    task: &ClassifyTask<'_>,
    c: f64,
    options: &AutoSvmOptions,
) -> Result<(Vec<usize>, AutoSvmTrace)> {
    task.validate(bundle.n())?;
    let n = bundle.n();
    let q = bundle.n_classes();
    let mut is_labeled = vec![false; n];
    for &i in task.labeled {
        is_labeled[i] = true;
    }
    let unlabeled: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();

    // Round 0: feature-only SVM.
    let composed0 = compose_features(&[bundle.features.clone()], task.labeled)?;
    let model0 = train_on_rows(&composed0, bundle, task.labeled, c, task.seed)?;
    let pred0 = predict_rows_subset(&model0, &composed0, &unlabeled)?;

    let mut assign = bundle.labels.clone();
    for (k, &i) in unlabeled.iter().enumerate() {
        assign[i] = pred0[k];
    }
    let mut memberships = DMatrix::zeros(n, q);
    for &i in task.labeled {
        memberships[(i, bundle.labels[i])] = 1.0;
    }
    if options.soft_memberships {
        let shares = model0.vote_shares(&composed0.select_rows(unlabeled.iter()))?;
        scatter_shares(&mut memberships, &unlabeled, &shares, model0.classes());
    } else {
        for &i in &unlabeled {
            memberships[(i, assign[i])] = 1.0;
        }
    }
    let mut prev_train_acc = training_accuracy(&model0, &composed0, bundle, task.labeled)?;

    let transition = bundle.graph.transition_matrix()?;
    let mut trace = AutoSvmTrace {
        iterations: 0,
        changes: Vec::new(),
        converged: false,
        cycle_detected: false,
    };
    // Unlabeled assignments two rounds back, for oscillation detection.
    let mut one_back: Vec<usize> = unlabeled.iter().map(|&i| assign[i]).collect();
    let mut two_back: Option<Vec<usize>> = None;

    for _t in 1..=options.max_iter {
        let ac = autocovariates(&transition, &memberships);
        let (composed, tr) =
            compose_features_with_transform(&[bundle.features.clone(), ac], task.labeled)?;
        let model = train_on_rows(&composed, bundle, task.labeled, c, task.seed)?;
        let train_acc = training_accuracy(&model, &composed, bundle, task.labeled)?;

        let mut new_memberships = memberships.clone();
        let new_pred: Vec<usize> = if options.sequential_updates {
            let mut preds = Vec::with_capacity(unlabeled.len());
            let mut raw = vec![0.0; bundle.n_features() + q];
            for &i in &unlabeled {
                // Rebuild this node's raw row against the memberships as
                // updated by the nodes processed before it.
                for j in 0..bundle.n_features() {
                    raw[j] = bundle.features[(i, j)];
                }
                let (cols, vals) = transition.matrix().row(i);
                for cc in 0..q {
                    raw[bundle.n_features() + cc] = cols
                        .iter()
                        .zip(vals)
                        .map(|(&j, &p)| p * new_memberships[(j, cc)])
                        .sum();
                }
                let std_row = tr.apply_row(&raw)?;
                let yi = model.predict_row(&std_row)?;
                preds.push(yi);
                for cc in 0..q {
                    new_memberships[(i, cc)] = 0.0;
                }
                if options.soft_memberships {
                    let one = DMatrix::from_row_slice(1, std_row.len(), &std_row);
                    let shares = model.vote_shares(&one)?;
                    scatter_shares(&mut new_memberships, &[i], &shares, model.classes());
                } else {
                    new_memberships[(i, yi)] = 1.0;
                }
            }
            preds
        } else {
            let preds = predict_rows_subset(&model, &composed, &unlabeled)?;
            for &i in &unlabeled {
                for cc in 0..q {
                    new_memberships[(i, cc)] = 0.0;
                }
            }
            if options.soft_memberships {
                let shares = model.vote_shares(&composed.select_rows(unlabeled.iter()))?;
                scatter_shares(&mut new_memberships, &unlabeled, &shares, model.classes());
            } else {
                for (k, &i) in unlabeled.iter().enumerate() {
                    new_memberships[(i, preds[k])] = 1.0;
                }
            }
            preds
        };

        let changed = unlabeled
            .iter()
            .zip(&new_pred)
            .filter(|(&i, &p)| assign[i] != p)
            .count();
        trace.iterations += 1;
        trace.changes.push(changed);

        if changed == 0 {
            trace.converged = true;
            break;
        }
        if two_back.as_deref() == Some(new_pred.as_slice()) {
            // A→B→A oscillation: keep whichever of the two states trained
            // the better-fitting model (ties go to the newer one).
            trace.cycle_detected = true;
            if train_acc >= prev_train_acc {
                for (k, &i) in unlabeled.iter().enumerate() {
                    assign[i] = new_pred[k];
                }
            }
            break;
        }

        for (k, &i) in unlabeled.iter().enumerate() {
            assign[i] = new_pred[k];
        }
        memberships = new_memberships;
        two_back = Some(std::mem::replace(&mut one_back, new_pred));
        prev_train_acc = train_acc;
    }
    if trace.iterations == options.max_iter && !trace.converged && !trace.cycle_detected {
        log::warn!(
            "autocovariate SVM did not converge within {} rounds",
            options.max_iter
        );
    }

    let out = task.targets.iter().map(|&i| assign[i]).collect();
    Ok((out, trace))
}

/// P · M, one column per class.
fn autocovariates(p: &TransitionView, memberships: &DMatrix<f64>) -> DMatrix<f64> {
    let n = memberships.nrows();
    let q = memberships.ncols();
    let mut out = DMatrix::zeros(n, q);
    let mut col = vec![0.0; n];
    for c in 0..q {
        for i in 0..n {
            col[i] = memberships[(i, c)];
        }
        let pc = p.mul_vec(&col);
        for i in 0..n {
            out[(i, c)] = pc[i];
        }
    }
    out
}

fn scatter_shares(
    memberships: &mut DMatrix<f64>,
    rows: &[usize],
    shares: &DMatrix<f64>,
    model_classes: &[usize],
) {
    for (k, &i) in rows.iter().enumerate() {
        for (ci, &cls) in model_classes.iter().enumerate() {
            memberships[(i, cls)] = shares[(k, ci)];
        }
    }
}

fn training_accuracy(
    model: &LinearSvmModel,
    composed: &DMatrix<f64>,
    bundle: &DatasetBundle,
    labeled: &[usize],
) -> Result<f64> {
    let pred = predict_rows_subset(model, composed, labeled)?;
    let hits = labeled
        .iter()
        .zip(&pred)
        .filter(|(&i, &p)| bundle.labels[i] == p)
        .count();
    Ok(hits as f64 / labeled.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::tests::two_clique_bundle;
    use crate::classify::{classify, MethodId, MethodParams, StructureCache};

    fn split(bundle: &DatasetBundle, labeled: &[usize]) -> Vec<usize> {
        (0..bundle.n()).filter(|i| !labeled.contains(i)).collect()
    }

    #[test]
    fn round_zero_matches_feature_only_svm() {
        let bundle = two_clique_bundle(true, 11);
        let labeled = [0usize, 1, 6, 7];
        let targets = split(&bundle, &labeled);
        let task = ClassifyTask {
            labeled: &labeled,
            targets: &targets,
            seed: 21,
        };
        let opts = AutoSvmOptions {
            max_iter: 0,
            ..Default::default()
        };
        let (auto_pred, trace) = autosvm_classify(&bundle, &task, 1.0, &opts).unwrap();
        let cache = StructureCache::new();
        let svm_pred = classify(
            &bundle,
            MethodId::SvmX,
            &MethodParams {
                c: Some(1.0),
                ..Default::default()
            },
            &task,
            &cache,
        )
        .unwrap();
        assert_eq!(auto_pred, svm_pred);
        assert_eq!(trace.iterations, 0);
    }

    #[test]
    fn converges_quickly_on_cliques() {
        // Homophilous graph, informative features: the fixed point should
        // arrive in a handful of rounds and match the block structure.
        let bundle = two_clique_bundle(true, 12);
        let labeled = [0usize, 1, 6, 7];
        let targets = split(&bundle, &labeled);
        let task = ClassifyTask {
            labeled: &labeled,
            targets: &targets,
            seed: 5,
        };
        let (pred, trace) = autosvm_classify(&bundle, &task, 10.0, &AutoSvmOptions::default())
            .unwrap();
        assert!(trace.converged, "trace: {trace:?}");
        assert!(trace.iterations <= 5, "trace: {trace:?}");
        let truth: Vec<usize> = targets.iter().map(|&i| bundle.labels[i]).collect();
        let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(hits >= 7, "{hits}/8 correct");
    }

    #[test]
    fn labeled_memberships_stay_clamped() {
        // With uninformative features round 0 is noise, so recovery can
        // only come from the clamped labeled neighbors' autocovariates.
        let bundle = two_clique_bundle(false, 13);
        let labeled = [0usize, 1, 2, 6, 7, 8];
        let targets = split(&bundle, &labeled);
        let task = ClassifyTask {
            labeled: &labeled,
            targets: &targets,
            seed: 5,
        };
        let (pred, _) = autosvm_classify(&bundle, &task, 10.0, &AutoSvmOptions::default()).unwrap();
        let truth: Vec<usize> = targets.iter().map(|&i| bundle.labels[i]).collect();
        let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(hits >= 5, "{hits}/6 correct");
    }

    #[test]
    fn sequential_and_soft_modes_run() {
        let bundle = two_clique_bundle(true, 14);
        let labeled = [0usize, 1, 6, 7];
        let targets = split(&bundle, &labeled);
        let task = ClassifyTask {
            labeled: &labeled,
            targets: &targets,
            seed: 7,
        };
        for opts in [
            AutoSvmOptions {
                sequential_updates: true,
                ..Default::default()
            },
            AutoSvmOptions {
                soft_memberships: true,
                ..Default::default()
            },
            AutoSvmOptions {
                sequential_updates: true,
                soft_memberships: true,
                ..Default::default()
            },
        ] {
            let (pred, trace) = autosvm_classify(&bundle, &task, 10.0, &opts).unwrap();
            assert_eq!(pred.len(), targets.len());
            assert!(trace.iterations <= opts.max_iter);
            let truth: Vec<usize> = targets.iter().map(|&i| bundle.labels[i]).collect();
            let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
            assert!(hits >= 6, "{hits}/8 correct under {opts:?}");
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let bundle = two_clique_bundle(true, 15);
        let labeled = [0usize, 3, 6, 9];
        let targets = split(&bundle, &labeled);
        let task = ClassifyTask {
            labeled: &labeled,
            targets: &targets,
            seed: 99,
        };
        let (a, ta) = autosvm_classify(&bundle, &task, 1.0, &AutoSvmOptions::default()).unwrap();
        let (b, tb) = autosvm_classify(&bundle, &task, 1.0, &AutoSvmOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.changes, tb.changes);
    }
}
