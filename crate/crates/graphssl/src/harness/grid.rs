//! Hyperparameter grids and the inner-fold exhaustive search.
//!
//! The default grids are the published tuning ranges: C over seven decades
//! (10⁻⁶…10⁶ stepping ×100), θ over {10⁻⁹, 10⁻⁶, 10⁻³, 1}, embedding
//! size over {5, 10, 20, 35, 50}% of n, and α over {0.2, 0.4, 0.6, 0.8,
//! 1.0}. Candidates are enumerated θ-outermost, then C, then p, then α;
//! ties on inner accuracy keep the earliest (smallest) tuple.

use serde::{Deserialize, Serialize};

use crate::classify::{classify, ClassifyTask, MethodId, MethodParams, StructureCache};
use crate::error::{Error, Result};
use crate::graph::io::DatasetBundle;

use super::cv::FoldSplit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGrids {
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_fraction: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for ParamGrids {
    fn default() -> Self {
        ParamGrids {
            c: vec![1e-6, 1e-4, 1e-2, 1e0, 1e2, 1e4, 1e6],
            theta: vec![1e-9, 1e-6, 1e-3, 1.0],
            p_fraction: vec![0.05, 0.10, 0.20, 0.35, 0.50],
            alpha: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

impl ParamGrids {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("c", &self.c),
            ("theta", &self.theta),
            ("p_fraction", &self.p_fraction),
            ("alpha", &self.alpha),
        ] {
            if grid.is_empty() {
                return Err(Error::invalid(format!("empty {name} grid")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "{name} grid must be strictly increasing"
                )));
            }
        }
        Ok(())
    }
}

/// Enumerates the candidate parameter tuples for one method, θ outermost,
/// then C, then p, then α. Parameter-free methods get an empty list.
pub fn method_grid(method: MethodId, grids: &ParamGrids) -> Vec<MethodParams> {
    let needs_theta = matches!(
        method,
        MethodId::BopA | MethodId::SvmBopmA | MethodId::SvmBopmAx
    );
    let needs_c = matches!(
        method,
        MethodId::SvmX
            | MethodId::SvmMoranA
            | MethodId::SvmGearyA
            | MethodId::SvmLpcaA
            | MethodId::SvmBopmA
            | MethodId::SvmMoranAx
            | MethodId::SvmGearyAx
            | MethodId::SvmLpcaAx
            | MethodId::SvmBopmAx
            | MethodId::AsvmAx
            | MethodId::SvmDkAx
    );
    let needs_p = method.embedding_kind().is_some();
    let needs_alpha = matches!(method, MethodId::CtkA);

    let opt = |used: bool, grid: &[f64]| -> Vec<Option<f64>> {
        if used {
            grid.iter().copied().map(Some).collect()
        } else {
            vec![None]
        }
    };
    let mut out = Vec::new();
    for &theta in &opt(needs_theta, &grids.theta) {
        for &c in &opt(needs_c, &grids.c) {
            for &p_fraction in &opt(needs_p, &grids.p_fraction) {
                for &alpha in &opt(needs_alpha, &grids.alpha) {
                    out.push(MethodParams {
                        c,
                        theta,
                        p_fraction,
                        alpha,
                    });
                }
            }
        }
    }
    if out.len() == 1 && out[0] == MethodParams::default() {
        // Parameter-free method: nothing to tune.
        return Vec::new();
    }
    out
}

/// Winning tuple of one inner-fold search.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub params: MethodParams,
    /// Mean inner-validation accuracy of the winner (NaN when nothing was
    /// tuned).
    pub inner_accuracy: f64,
    /// Candidates evaluated.
    pub evaluated: usize,
}

/// Exhaustive search over the method's grid using the split's inner folds:
/// each candidate trains on four inner folds and validates on the fifth,
/// averaged. Candidates that fail on any inner fold are skipped. A method
/// with no parameters passes through untouched.
pub fn grid_search(
    bundle: &DatasetBundle,
    method: MethodId,
    grids: &ParamGrids,
    split: &FoldSplit,
    seed: u64,
    cache: &StructureCache,
) -> Result<GridOutcome> {
    grids.validate()?;
    let candidates = method_grid(method, grids);
    if candidates.is_empty() {
        return Ok(GridOutcome {
            params: MethodParams::default(),
            inner_accuracy: f64::NAN,
            evaluated: 0,
        });
    }

    let mut best: Option<(MethodParams, f64)> = None;
    let mut last_failure = String::new();
    for params in &candidates {
        match inner_mean_accuracy(bundle, method, params, split, seed, cache) {
            Ok(acc) => {
                // Strict improvement keeps the earliest tuple on ties.
                if best.as_ref().map_or(true, |&(_, b)| acc > b) {
                    best = Some((*params, acc));
                }
            }
            Err(e) => {
                log::warn!("{method} candidate {} skipped: {e}", params.to_json());
                last_failure = e.to_string();
            }
        }
    }
    match best {
        Some((params, inner_accuracy)) => Ok(GridOutcome {
            params,
            inner_accuracy,
            evaluated: candidates.len(),
        }),
        None => Err(Error::SolveFailure(format!(
            "every {method} grid candidate failed; last error: {last_failure}"
        ))),
    }
}

fn inner_mean_accuracy(
    bundle: &DatasetBundle,
    method: MethodId,
    params: &MethodParams,
    split: &FoldSplit,
    seed: u64,
    cache: &StructureCache,
) -> Result<f64> {
    let mut total = 0.0;
    for fold in &split.inner {
        let train: Vec<usize> = split
            .labeled
            .iter()
            .copied()
            .filter(|i| !fold.contains(i))
            .collect();
        if train.is_empty() || fold.is_empty() {
            return Err(Error::invalid("empty inner fold"));
        }
        let task = ClassifyTask {
            labeled: &train,
            targets: fold,
            seed,
        };
        let pred = classify(bundle, method, params, &task, cache)?;
        let hits = fold
            .iter()
            .zip(&pred)
            .filter(|(&i, &p)| bundle.labels[i] == p)
            .count();
        total += hits as f64 / fold.len() as f64;
    }
    Ok(total / split.inner.len() as f64)
}

/// Most frequent value; ties go to the smallest. Used to report the modal
/// selected parameter across folds, runs and datasets.
pub fn mode_value(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite parameter values"));
    let mut best = sorted[0];
    let mut best_count = 0usize;
    let mut pos = 0;
    while pos < sorted.len() {
        let mut end = pos + 1;
        while end < sorted.len() && sorted[end] == sorted[pos] {
            end += 1;
        }
        if end - pos > best_count {
            best_count = end - pos;
            best = sorted[pos];
        }
        pos = end;
    }
    Some(best)
}
