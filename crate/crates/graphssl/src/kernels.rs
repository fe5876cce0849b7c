//! Graph and feature kernels plus the sum-of-similarities classifier.
//!
//! The regularized commute-time kernel K = (D − αA)⁻¹ rewards short,
//! high-probability connections: K_ij is a discounted measure of reaching j
//! from i. Its columns are obtained by conjugate-gradient solves against the
//! sparse system, so K never requires a dense factorization.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Rctk,
    LinearFeatures,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    pub k: DMatrix<f64>,
}

const CG_TOL: f64 = 1e-11;

/// Jacobi-preconditioned conjugate gradients for s.p.d. systems, tolerance
/// on the unpreconditioned residual norm.
fn cg_solve(
    apply: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut q = vec![0.0; n];
    for _ in 0..max_iter {
        let rnorm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= tol {
            return Ok(x);
        }
        apply(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::SolveFailure(
                "system is not positive definite".into(),
            ));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence(format!(
        "conjugate gradients did not reach tolerance {tol:.1e} in {max_iter} iterations"
    )))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "regularization must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Solves (D − αA)s = y for one right-hand side.
pub fn rctk_solve(graph: &Graph, alpha: f64, y: &[f64]) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    graph.require_connected("the regularized commute-time kernel")?;
    let d = graph.degrees();
    let apply = |x: &[f64], out: &mut [f64]| {
        graph.adjacency().mul_vec_into(x, out);
        for i in 0..out.len() {
            out[i] = d[i] * x[i] - alpha * out[i];
        }
    };
    let max_iter = 40 * graph.n() + 400;
    cg_solve(&apply, d, y, CG_TOL, max_iter).map_err(|e| match e {
        // α = 1 makes D − A the singular Laplacian; report it as such.
        Error::NonConvergence(_) | Error::SolveFailure(_) => Error::SolveFailure(format!(
            "(D − {alpha}·A) solve failed: {e}"
        )),
        other => other,
    })
}

/// Regularized commute-time kernel K = (D − αA)⁻¹, materialized densely.
/// Column residuals are checked to 1e−10 before the result is symmetrized.
pub fn rctk(graph: &Graph, alpha: f64) -> Result<KernelMatrix> {
    check_alpha(alpha)?;
    let n = graph.n();
    let d = graph.degrees();
    let mut k = DMatrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for j in 0..n {
        rhs[j] = 1.0;
        let col = rctk_solve(graph, alpha, &rhs)?;
        rhs[j] = 0.0;
        // Residual ‖(D−αA)k_j − e_j‖
        let mut check = graph.adjacency().mul_vec(&col);
        for i in 0..n {
            check[i] = d[i] * col[i] - alpha * check[i];
        }
        check[j] -= 1.0;
        let resid: f64 = check.iter().map(|v| v * v).sum::<f64>().sqrt();
        if resid > 1e-10 {
            return Err(Error::SolveFailure(format!(
                "kernel column {j} residual {resid:.3e} exceeds 1e-10"
            )));
        }
        for i in 0..n {
            k[(i, j)] = col[i];
        }
    }
    // The exact inverse is symmetric; remove the CG-level asymmetry.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    Ok(KernelMatrix {
        kind: KernelKind::Rctk,
        k,
    })
}

/// Linear kernel on node features: K = XXᵀ.
pub fn linear_feature_kernel(features: &DMatrix<f64>) -> KernelMatrix {
    KernelMatrix {
        kind: KernelKind::LinearFeatures,
        k: features * features.transpose(),
    }
}

/// Assigns each target the class with the largest summed similarity to that
/// class's labeled nodes: score_i(c) = Σ_{j ∈ L_c} K_ij. Ties go to the
/// lowest class id.
pub fn sum_of_similarities_classify(
    kernel: &KernelMatrix,
    labeled: &BTreeMap<usize, Vec<usize>>,
    targets: &[usize],
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if labeled.is_empty() {
        return Err(Error::invalid("no labeled classes"));
    }
    for (&class, members) in labeled {
        if members.is_empty() {
            return Err(Error::invalid(format!("class {class} has no labeled nodes")));
        }
    }
    let classes: Vec<usize> = labeled.keys().copied().collect();
    let mut scores = DMatrix::zeros(targets.len(), classes.len());
    let mut predictions = Vec::with_capacity(targets.len());
    for (t, &node) in targets.iter().enumerate() {
        let mut best = 0;
        for (c, class) in classes.iter().enumerate() {
            let s: f64 = labeled[class].iter().map(|&j| kernel.k[(node, j)]).sum();
            scores[(t, c)] = s;
            if s > scores[(t, best)] {
                best = c;
            }
        }
        predictions.push(classes[best]);
    }
    Ok((predictions, scores))
}

/// Sum-of-similarities under the commute-time kernel without materializing
/// K: one sparse solve (D − αA)s = yᶜ per class. Produces the same
/// classification as [`sum_of_similarities_classify`] on [`rctk`].
pub fn rctk_sum_of_similarities(
    graph: &Graph,
    alpha: f64,
    labeled: &BTreeMap<usize, Vec<usize>>,
    targets: &[usize],
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    if labeled.is_empty() {
        return Err(Error::invalid("no labeled classes"));
    }
    let n = graph.n();
    let classes: Vec<usize> = labeled.keys().copied().collect();
    let mut class_scores = Vec::with_capacity(classes.len());
    for class in &classes {
        let members = &labeled[class];
        if members.is_empty() {
            return Err(Error::invalid(format!("class {class} has no labeled nodes")));
        }
        let mut y = vec![0.0; n];
        for &m in members {
            y[m] = 1.0;
        }
        class_scores.push(rctk_solve(graph, alpha, &y)?);
    }
    let mut scores = DMatrix::zeros(targets.len(), classes.len());
    let mut predictions = Vec::with_capacity(targets.len());
    for (t, &node) in targets.iter().enumerate() {
        let mut best = 0;
        for c in 0..classes.len() {
            scores[(t, c)] = class_scores[c][node];
            if scores[(t, c)] > scores[(t, best)] {
                best = c;
            }
        }
        predictions.push(classes[best]);
    }
    Ok((predictions, scores))
}
