//! Sparse symmetric eigensolver used by all four structural embeddings.
//!
//! The embedding eigensystems share one shape: a symmetric operator, the
//! trivial constant direction to avoid, and a request for the few largest or
//! smallest remaining eigenpairs. The centering metric H = I − eeᵀ/n acts as
//! the identity on the subspace orthogonal to e, so every generalized system
//! with metric H reduces to a standard one restricted to that subspace;
//! the solver therefore works with plain orthonormality plus deflation of
//! the constant direction.
//!
//! The method is Lanczos with full reorthogonalization, restarted with
//! locking of converged pairs; restarts reuse the leading unconverged Ritz
//! direction and deepen the Krylov space on stagnation. Smallest-pair
//! requests run on σI − M with σ an upper spectral bound, avoiding
//! shift-invert solves.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Symmetric linear operator applied matrix-free.
pub trait SymOp: Sync {
    fn n(&self) -> usize;
    /// y ← Mx.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// An upper bound on the largest eigenvalue (Gershgorin or norm based).
    fn upper_bound(&self) -> f64;
}

/// Which end of the spectrum to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    /// Largest algebraic eigenvalues, returned in descending order.
    Largest,
    /// Smallest eigenvalues excluding the deflated trivial direction,
    /// returned in ascending order.
    SmallestNontrivial,
}

#[derive(Debug, Clone)]
pub struct Eigs {
    /// Eigenvalues in the order promised by [`Which`].
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one column per eigenvalue.
    pub vectors: DMatrix<f64>,
}

const RESIDUAL_TOL: f64 = 1e-10;
const MAX_RESTARTS_EXTRA: usize = 12;

/// Extracts `count` eigenpairs of a symmetric operator.
///
/// With `deflate_constant` the iteration is confined to the subspace
/// orthogonal to the all-ones vector, which realizes the centering metric of
/// the autocorrelation eigensystems (H is the identity there). Residuals
/// satisfy ‖Mx − λx‖ ≤ 1e−8‖x‖; signs follow the
/// largest-magnitude-entry-positive convention.
pub fn symmetric_eigs(
    op: &dyn SymOp,
    count: usize,
    which: Which,
    deflate_constant: bool,
    seed: u64,
) -> Result<Eigs> {
    let n = op.n();
    let n_sub = if deflate_constant { n - 1 } else { n };
    if count == 0 {
        return Err(Error::invalid("requested zero eigenpairs"));
    }
    if count > n_sub {
        return Err(Error::invalid(format!(
            "requested {count} eigenpairs but only {n_sub} nontrivial directions exist"
        )));
    }

    let bound = op.upper_bound();
    let scale = bound.abs().max(1.0);
    // Smallest pairs = largest of the reflected operator σI − M.
    let shift = match which {
        Which::Largest => None,
        Which::SmallestNontrivial => Some(bound),
    };
    let work = |x: &[f64], y: &mut [f64]| {
        op.apply(x, y);
        if let Some(sigma) = shift {
            for i in 0..n {
                y[i] = sigma * x[i] - y[i];
            }
        }
    };

    let mut deflation: Vec<Vec<f64>> = Vec::new();
    if deflate_constant {
        let inv = 1.0 / (n as f64).sqrt();
        deflation.push(vec![inv; n]);
    }
    // Converged (work-operator eigenvalue, eigenvector) pairs.
    let mut locked: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // A restart that finds any eigenvalue above the current count-th best
    // means the set was incomplete (a degenerate eigenvalue with copies in
    // unexplored directions); only a quiet restart confirms completeness.
    let mut confirmed = false;
    let mut verify_m = 12usize;
    // Krylov budget per restart; doubles whenever a restart locks nothing,
    // so a slowly separating pair eventually gets the full subspace (where
    // Ritz pairs are exact) instead of stalling at a fixed depth.
    let mut base_m = 50usize;
    // Leading unconverged Ritz vector of the previous restart. Restarting
    // from it accumulates progress across restarts; a fresh random start
    // would face the same convergence wall every time.
    let mut carry: Option<Vec<f64>> = None;
    let max_restarts = 4 * count + MAX_RESTARTS_EXTRA;
    for _ in 0..max_restarts {
        if locked.len() >= count && confirmed {
            break;
        }
        let remaining = n_sub - locked.len();
        if remaining == 0 {
            break;
        }
        let verification_only = locked.len() >= count;
        let m_max = if verification_only {
            remaining.min(verify_m)
        } else {
            remaining.min((2 * (count - locked.len()) + 30).max(base_m))
        };
        let kth_before: Option<f64> = if locked.len() >= count {
            let mut vals: Vec<f64> = locked.iter().map(|(v, _)| *v).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            Some(vals[count - 1])
        } else {
            None
        };

        // Start vector orthogonal to the deflation set and locked pairs:
        // the carried Ritz direction when one survives projection, else a
        // seeded random draw.
        let mut q = carry.take().unwrap_or_default();
        project_out(&mut q, &deflation, &locked);
        let mut norm = norm2(&q);
        while norm <= 1e-8 {
            q = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            project_out(&mut q, &deflation, &locked);
            norm = norm2(&q);
        }
        scale_vec(&mut q, 1.0 / norm);

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![0.0; n];

        for j in 0..m_max {
            work(&q, &mut w);
            let alpha = dot(&q, &w);
            for i in 0..n {
                w[i] -= alpha * q[i];
            }
            if let Some(prev) = basis.last() {
                let beta_prev = *betas.last().unwrap();
                for i in 0..n {
                    w[i] -= beta_prev * prev[i];
                }
            }
            basis.push(std::mem::replace(&mut q, Vec::new()));
            alphas.push(alpha);
            // Full reorthogonalization, twice, against everything retained.
            for _ in 0..2 {
                project_out(&mut w, &deflation, &locked);
                for b in &basis {
                    let c = dot(b, &w);
                    for i in 0..n {
                        w[i] -= c * b[i];
                    }
                }
            }
            let beta = norm2(&w);
            if beta <= 1e-13 * scale || j + 1 == m_max {
                // Invariant subspace reached (or budget exhausted).
                break;
            }
            betas.push(beta);
            q = w.iter().map(|v| v / beta).collect();
        }

        let m = basis.len();
        // Ritz pairs of the tridiagonal restriction.
        let mut t = DMatrix::zeros(m, m);
        for j in 0..m {
            t[(j, j)] = alphas[j];
            if j + 1 < m {
                t[(j, j + 1)] = betas[j];
                t[(j + 1, j)] = betas[j];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        // Even an unconverged Ritz value above the count-th best blocks
        // confirmation: the complement demonstrably holds something bigger.
        let ritz_above_kth = match kth_before {
            Some(kth) => order
                .first()
                .is_some_and(|&i| eig.eigenvalues[i] > kth + 1e-9 * scale),
            None => false,
        };

        let mut locked_any = false;
        let mut found_above_kth = false;
        for &idx in &order {
            if locked.len() >= count && !verification_only {
                break;
            }
            let theta = eig.eigenvalues[idx];
            if verification_only {
                // Only values that displace the current count-th best matter.
                match kth_before {
                    Some(kth) if theta > kth + 1e-9 * scale => {}
                    _ => break,
                }
            }
            let mut y = vec![0.0; n];
            for (k, b) in basis.iter().enumerate() {
                let s = eig.eigenvectors[(k, idx)];
                for i in 0..n {
                    y[i] += s * b[i];
                }
            }
            // Clean against previous locks and renormalize before the
            // explicit residual check.
            project_out(&mut y, &deflation, &locked);
            let norm = norm2(&y);
            if norm < 1e-8 {
                continue;
            }
            scale_vec(&mut y, 1.0 / norm);
            work(&y, &mut w);
            // Judge the pair by its Rayleigh quotient rather than the
            // tridiagonal value: at large depth the reorthogonalization
            // corrections drift T away from the true restriction, and that
            // drift lands in θ, not in the subspace.
            let rho = dot(&y, &w);
            let mut resid = 0.0;
            for i in 0..n {
                let r = w[i] - rho * y[i];
                resid += r * r;
            }
            if resid.sqrt() <= RESIDUAL_TOL * scale {
                if let Some(kth) = kth_before {
                    if rho > kth + 1e-9 * scale {
                        found_above_kth = true;
                    }
                }
                locked.push((rho, y));
                locked_any = true;
            } else {
                // Ritz values further down this run are even less reliable;
                // restart from this refined direction instead.
                carry = Some(y);
                break;
            }
        }
        confirmed =
            locked.len() >= count && kth_before.is_some() && !found_above_kth && !ritz_above_kth;
        if verification_only && ritz_above_kth && !found_above_kth {
            // The bigger value did not converge within the verification
            // budget; widen the next verification run.
            verify_m = (verify_m * 2).min(400);
        }
        if !locked_any && !verification_only {
            if m == remaining && carry.is_none() {
                // Full subspace explored and no candidate survives
                // projection: genuine failure.
                break;
            }
            // No lock from this space; the leading remaining pair separates
            // too slowly at the current depth.
            base_m = (2 * base_m).min(n);
        }
    }

    if locked.len() < count {
        return Err(Error::NonConvergence(format!(
            "eigensolver converged {} of {count} requested pairs",
            locked.len()
        )));
    }

    // Largest of the work operator first. For smallest-pair requests the
    // reflection σ − θ turns that descending order into the promised
    // ascending one.
    locked.sort_by(|a, b| b.0.total_cmp(&a.0));
    locked.truncate(count);
    let values: Vec<f64> = locked
        .iter()
        .map(|(theta, _)| match shift {
            Some(sigma) => sigma - theta,
            None => *theta,
        })
        .collect();
    let mut vectors = DMatrix::zeros(n, count);
    for (c, (_, y)) in locked.iter().enumerate() {
        for i in 0..n {
            vectors[(i, c)] = y[i];
        }
    }
    debug_assert!(match which {
        Which::Largest => values.windows(2).all(|w| w[0] >= w[1] - 1e-9 * scale),
        Which::SmallestNontrivial => values.windows(2).all(|w| w[0] <= w[1] + 1e-9 * scale),
    });
    for c in 0..count {
        fix_sign(&mut vectors, c);
    }
    Ok(Eigs { values, vectors })
}

/// Makes the largest-magnitude entry of a column positive; among equal
/// magnitudes the lowest index decides.
fn fix_sign(vectors: &mut DMatrix<f64>, col: usize) {
    let n = vectors.nrows();
    let mut best = 0;
    for i in 1..n {
        if vectors[(i, col)].abs() > vectors[(best, col)].abs() {
            best = i;
        }
    }
    if vectors[(best, col)] < 0.0 {
        for i in 0..n {
            vectors[(i, col)] = -vectors[(i, col)];
        }
    }
}

fn project_out(v: &mut [f64], deflation: &[Vec<f64>], locked: &[(f64, Vec<f64>)]) {
    for d in deflation {
        let c = dot(d, v);
        for i in 0..v.len() {
            v[i] -= c * d[i];
        }
    }
    for (_, d) in locked {
        let c = dot(d, v);
        for i in 0..v.len() {
            v[i] -= c * d[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn scale_vec(a: &mut [f64], s: f64) {
    for v in a {
        *v *= s;
    }
}

/// x ↦ H A H x with H = I − eeᵀ/n applied as mean subtraction; the centered
/// adjacency operator behind the Moran embedding. Never materialized.
pub struct CenteredAdjacencyOp<'a> {
    graph: &'a Graph,
}

impl<'a> CenteredAdjacencyOp<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        CenteredAdjacencyOp { graph }
    }
}

fn subtract_mean(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x {
        *v -= mean;
    }
}

impl SymOp for CenteredAdjacencyOp<'_> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut hx = x.to_vec();
        subtract_mean(&mut hx);
        self.graph.adjacency().mul_vec_into(&hx, y);
        subtract_mean(y);
    }

    fn upper_bound(&self) -> f64 {
        // ‖HAH‖ ≤ ‖A‖∞ = max degree (H is an orthogonal projector).
        self.graph.degrees().iter().cloned().fold(0.0, f64::max)
    }
}

/// Laplacian operator L = D − A for the Geary embedding.
pub struct LaplacianOp<'a> {
    graph: &'a Graph,
}

impl<'a> LaplacianOp<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        LaplacianOp { graph }
    }
}

impl SymOp for LaplacianOp<'_> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.graph.adjacency().mul_vec_into(x, y);
        let d = self.graph.degrees();
        for i in 0..y.len() {
            y[i] = d[i] * x[i] - y[i];
        }
    }

    fn upper_bound(&self) -> f64 {
        // Gershgorin: λ_max(L) ≤ 2·max degree.
        2.0 * self.graph.degrees().iter().cloned().fold(0.0, f64::max)
    }
}

/// M = (I − P)ᵀ(I − P) for the local-PCA embedding. Pᵀ is applied through
/// the adjacency: Pᵀu = A D⁻¹ u.
pub struct SmoothnessOp<'a> {
    graph: &'a Graph,
}

impl<'a> SmoothnessOp<'a> {
    pub fn new(graph: &'a Graph) -> Self {
        SmoothnessOp { graph }
    }
}

impl SymOp for SmoothnessOp<'_> {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.graph.n();
        let d = self.graph.degrees();
        // u = (I − P)x  with  Px = D⁻¹(Ax)
        let mut u = vec![0.0; n];
        self.graph.adjacency().mul_vec_into(x, &mut u);
        for i in 0..n {
            u[i] = x[i] - u[i] / d[i];
        }
        // y = (I − Pᵀ)u  with  Pᵀu = A(D⁻¹u)
        let scaled: Vec<f64> = (0..n).map(|i| u[i] / d[i]).collect();
        self.graph.adjacency().mul_vec_into(&scaled, y);
        for i in 0..n {
            y[i] = u[i] - y[i];
        }
    }

    fn upper_bound(&self) -> f64 {
        // σ_max(I−P)² ≤ (1 + ‖P‖₂)² with ‖P‖₂ ≤ √(‖P‖₁‖P‖∞) and ‖P‖∞ = 1.
        let n = self.graph.n();
        let d = self.graph.degrees();
        let mut col_sums = vec![0.0; n];
        for (i, j, a) in self.graph.adjacency().iter() {
            col_sums[j] += a / d[i];
        }
        let p1 = col_sums.iter().cloned().fold(0.0, f64::max);
        (1.0 + p1.sqrt()).powi(2)
    }
}

/// Dense symmetric operator (used for the BoP modularity matrix).
pub struct DenseSymOp {
    m: DMatrix<f64>,
}

impl DenseSymOp {
    pub fn new(m: DMatrix<f64>) -> Self {
        DenseSymOp { m }
    }
}

impl SymOp for DenseSymOp {
    fn n(&self) -> usize {
        self.m.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.m.nrows();
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.m[(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }

    fn upper_bound(&self) -> f64 {
        let n = self.m.nrows();
        (0..n)
            .map(|i| (0..n).map(|j| self.m[(i, j)].abs()).sum())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_largest() {
        let op = DenseSymOp::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            3.0, 2.0, 1.0,
        ])));
        let eigs = symmetric_eigs(&op, 2, Which::Largest, false, 7).unwrap();
        assert_relative_eq!(eigs.values[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(eigs.values[1], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn centered_adjacency_k2() {
        let g = Graph::from_unit_edges(2, &[(0, 1)]);
        let op = CenteredAdjacencyOp::new(&g);
        let eigs = symmetric_eigs(&op, 1, Which::Largest, true, 7).unwrap();
        assert_relative_eq!(eigs.values[0], -1.0, epsilon = 1e-9);
        // Column ∝ (1,−1)/√2; the entry magnitudes tie, so either
        // orientation can win the sign convention, but the winner is
        // positive.
        let inv = 1.0 / 2f64.sqrt();
        let (a, b) = (eigs.vectors[(0, 0)], eigs.vectors[(1, 0)]);
        assert_relative_eq!(a.abs(), inv, epsilon = 1e-8);
        assert_relative_eq!(b.abs(), inv, epsilon = 1e-8);
        assert!(a * b < 0.0);
        assert!(a.max(b) > 0.0);
    }

    #[test]
    fn matches_dense_oracle_random_20() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen::<f64>() - 0.5;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let dense = SymmetricEigen::new(m.clone());
        let mut all: Vec<f64> = dense.eigenvalues.iter().cloned().collect();
        all.sort_by(|a, b| b.total_cmp(a));

        let op = DenseSymOp::new(m.clone());
        let eigs = symmetric_eigs(&op, 5, Which::Largest, false, 3).unwrap();
        for k in 0..5 {
            assert_relative_eq!(eigs.values[k], all[k], epsilon = 1e-8);
            // Residual contract.
            let x = eigs.vectors.column(k);
            let r = &m * x - eigs.values[k] * x;
            assert!(r.norm() <= 1e-8);
        }

        let small = symmetric_eigs(&op, 3, Which::SmallestNontrivial, false, 3).unwrap();
        for k in 0..3 {
            assert_relative_eq!(small.values[k], all[n - 1 - k], epsilon = 1e-8);
        }
    }

    #[test]
    fn deflation_excludes_constant_direction() {
        // L of K2: spectrum {0 (on e), 2}. Smallest nontrivial must be 2.
        let g = Graph::from_unit_edges(2, &[(0, 1)]);
        let op = LaplacianOp::new(&g);
        let eigs = symmetric_eigs(&op, 1, Which::SmallestNontrivial, true, 7).unwrap();
        assert_relative_eq!(eigs.values[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn count_too_large_rejected() {
        let g = Graph::from_unit_edges(3, &[(0, 1), (1, 2)]);
        let op = LaplacianOp::new(&g);
        assert!(symmetric_eigs(&op, 3, Which::SmallestNontrivial, true, 7).is_err());
        assert!(symmetric_eigs(&op, 0, Which::Largest, false, 7).is_err());
    }

    #[test]
    fn repeated_eigenvalues_give_orthonormal_basis() {
        // diag(5,5,5,1): locking + restart must find all three copies of 5.
        let op = DenseSymOp::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            5.0, 5.0, 5.0, 1.0,
        ])));
        let eigs = symmetric_eigs(&op, 3, Which::Largest, false, 9).unwrap();
        for v in &eigs.values {
            assert_relative_eq!(*v, 5.0, epsilon = 1e-9);
        }
        let g = eigs.vectors.transpose() * &eigs.vectors;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(g[(i, j)], want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn smoothness_op_matches_dense_form() {
        let g = Graph::from_unit_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]);
        let p = g.transition_matrix().unwrap().to_dense();
        let m = (DMatrix::identity(5, 5) - &p).transpose() * (DMatrix::identity(5, 5) - &p);
        let op = SmoothnessOp::new(&g);
        let x: Vec<f64> = vec![0.3, -1.0, 2.0, 0.5, -0.7];
        let mut y = vec![0.0; 5];
        op.apply(&x, &mut y);
        let want = m * nalgebra::DVector::from_vec(x);
        for i in 0..5 {
            assert_relative_eq!(y[i], want[i], epsilon = 1e-12);
        }
    }
}
