//! Simultaneous-autoregressive classifier: one SAR regression per class on
//! the class indicator, y = ρPy + Xw + ε, predicting memberships for every
//! node through the equilibrium (I − ρP)⁻¹Xw.
//!
//! ρ is estimated per class by maximizing the concentrated Gaussian
//! log-likelihood over the labeled rows: for a candidate ρ the spatially
//! filtered target z = y − ρPy is regressed on [X, 1] by least squares and
//! LL(ρ) = Σᵢ ln|1 − ρλᵢ| − (n_L/2)·ln σ̂²(ρ), with λᵢ the eigenvalues of
//! the transition matrix (real, since P is similar to the symmetric
//! D^{−1/2}AD^{−1/2}). Unlabeled entries of the indicator are treated as
//! zero when filtering — with every node labeled this is the exact
//! concentrated likelihood. The search runs a coarse grid over the
//! stability interval followed by golden-section refinement.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::io::DatasetBundle;

/// Dense-solve guard: fitting and prediction factorize n×n matrices.
const DENSE_CAP: usize = 5000;
/// Grid resolution of the coarse ρ sweep.
const RHO_GRID: usize = 41;
/// Keep ρ off the interval endpoints where I − ρP turns singular.
const INTERVAL_INSET: f64 = 1e-3;
/// Floor for σ̂² so perfect fits on tiny inputs keep the likelihood finite.
const SIGMA2_FLOOR: f64 = 1e-12;

/// One fitted autoregression.
#[derive(Debug, Clone)]
pub struct SarClassFit {
    pub rho: f64,
    /// Regression weights on [features, intercept].
    pub weights: DVector<f64>,
    pub sigma2: f64,
    /// Concentrated log-likelihood at `rho` (additive constants dropped).
    pub log_likelihood: f64,
}

/// Per-class fits, index-aligned with the dataset's class ids.
#[derive(Debug, Clone)]
pub struct SarModel {
    pub per_class: Vec<SarClassFit>,
}

/// Everything ρ-independent about one fitting problem, shared across
/// classes and candidate ρ values.
pub(crate) struct SarWorkspace {
    labeled: Vec<usize>,
    /// Labeled rows of [X, 1].
    design: DMatrix<f64>,
    /// Cholesky of designᵀ·design (ridge-jittered if needed).
    normal: Cholesky<f64, nalgebra::Dyn>,
    /// Eigenvalues of the transition matrix.
    eigs: Vec<f64>,
    /// Admissible ρ interval after insetting.
    lo: f64,
    hi: f64,
}

impl SarWorkspace {
    pub(crate) fn new(bundle: &DatasetBundle, labeled: &[usize]) -> Result<Self> {
        let n = bundle.n();
        if n > DENSE_CAP {
            return Err(Error::invalid(format!(
                "{n} nodes exceed the dense autoregressive solve cap of {DENSE_CAP}"
            )));
        }
        if labeled.is_empty() {
            return Err(Error::invalid("no labeled nodes"));
        }
        for &i in labeled {
            if i >= n {
                return Err(Error::invalid(format!("labeled node {i} out of range")));
            }
        }
        bundle.graph.require_connected("autoregressive fitting")?;

        let m = bundle.n_features();
        let mut design = DMatrix::zeros(labeled.len(), m + 1);
        for (r, &i) in labeled.iter().enumerate() {
            for j in 0..m {
                design[(r, j)] = bundle.features[(i, j)];
            }
            design[(r, m)] = 1.0;
        }
        let gram = design.transpose() * &design;
        let normal = factor_with_jitter(&gram)?;

        // Eigenvalues of P through the symmetric similar matrix
        // D^{−1/2} A D^{−1/2}.
        let degrees = bundle.graph.degrees();
        let mut sym = DMatrix::zeros(n, n);
        for (i, j, a) in bundle.graph.adjacency().iter() {
            sym[(i, j)] = a / (degrees[i] * degrees[j]).sqrt();
        }
        let eigs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        let max_eig = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        // Stability demands 1 − ρλᵢ > 0 for every eigenvalue; intersect
        // with (−1, 1) and inset to keep the determinant well away from 0.
        let lo_raw = if min_eig < 0.0 {
            (1.0 / min_eig).max(-1.0)
        } else {
            -1.0
        };
        let hi_raw = if max_eig > 0.0 {
            (1.0 / max_eig).min(1.0)
        } else {
            1.0
        };
        let span = hi_raw - lo_raw;
        if !(span > 0.0) {
            return Err(Error::invalid("empty autoregressive stability interval"));
        }
        Ok(SarWorkspace {
            labeled: labeled.to_vec(),
            design,
            normal,
            eigs,
            lo: lo_raw + INTERVAL_INSET * span,
            hi: hi_raw - INTERVAL_INSET * span,
        })
    }

    /// Profile log-likelihood pieces at one ρ for a prepared target.
    fn profile(&self, y_l: &DVector<f64>, py_l: &DVector<f64>, rho: f64) -> (f64, DVector<f64>, f64) {
        let z = y_l - py_l * rho;
        let w = self.normal.solve(&(self.design.transpose() * &z));
        let resid = &z - &self.design * &w;
        let nl = self.labeled.len() as f64;
        let sigma2 = (resid.norm_squared() / nl).max(SIGMA2_FLOOR);
        let log_det: f64 = self.eigs.iter().map(|&l| (1.0 - rho * l).abs().ln()).sum();
        let ll = log_det - 0.5 * nl * sigma2.ln();
        (ll, w, sigma2)
    }

    /// Fits one target vector (class indicator or any real signal over all
    /// nodes). `fixed_rho` skips estimation.
    pub(crate) fn fit_target(
        &self,
        bundle: &DatasetBundle,
        y_full: &[f64],
        fixed_rho: Option<f64>,
    ) -> Result<SarClassFit> {
        let py_full = bundle.graph.transition_matrix()?.mul_vec(y_full);
        let y_l = DVector::from_iterator(
            self.labeled.len(),
            self.labeled.iter().map(|&i| y_full[i]),
        );
        let py_l = DVector::from_iterator(
            self.labeled.len(),
            self.labeled.iter().map(|&i| py_full[i]),
        );

        let rho = match fixed_rho {
            Some(r) => r,
            None => {
                // Coarse sweep, then golden-section inside the bracket
                // around the best grid point.
                let step = (self.hi - self.lo) / (RHO_GRID - 1) as f64;
                let mut best_k = 0usize;
                let mut best_ll = f64::NEG_INFINITY;
                for k in 0..RHO_GRID {
                    let r = self.lo + step * k as f64;
                    let (ll, _, _) = self.profile(&y_l, &py_l, r);
                    if ll > best_ll {
                        best_ll = ll;
                        best_k = k;
                    }
                }
                let mut a = self.lo + step * best_k.saturating_sub(1) as f64;
                let mut b = self.lo + step * (best_k + 1).min(RHO_GRID - 1) as f64;
                let inv_phi = 0.618_033_988_749_894_9;
                let mut x1 = b - inv_phi * (b - a);
                let mut x2 = a + inv_phi * (b - a);
                let mut f1 = self.profile(&y_l, &py_l, x1).0;
                let mut f2 = self.profile(&y_l, &py_l, x2).0;
                for _ in 0..80 {
                    if b - a < 1e-9 {
                        break;
                    }
                    if f1 >= f2 {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - inv_phi * (b - a);
                        f1 = self.profile(&y_l, &py_l, x1).0;
                    } else {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + inv_phi * (b - a);
                        f2 = self.profile(&y_l, &py_l, x2).0;
                    }
                }
                let mid = 0.5 * (a + b);
                // The refined point can only replace the grid winner if it
                // actually improves on it.
                let r_grid = self.lo + step * best_k as f64;
                if self.profile(&y_l, &py_l, mid).0 >= best_ll {
                    mid
                } else {
                    r_grid
                }
            }
        };

        let (ll, w, sigma2) = self.profile(&y_l, &py_l, rho);
        Ok(SarClassFit {
            rho,
            weights: w,
            sigma2,
            log_likelihood: ll,
        })
    }
}

fn factor_with_jitter(gram: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let p = gram.nrows();
    let mean_diag = (gram.diagonal().sum() / p as f64).max(f64::MIN_POSITIVE);
    for jitter in [0.0, 1e-8, 1e-6, 1e-4, 1e-2] {
        let mut g = gram.clone();
        for i in 0..p {
            g[(i, i)] += jitter * mean_diag;
        }
        if let Some(ch) = Cholesky::new(g) {
            if jitter > 0.0 {
                log::warn!("regression design is rank-deficient; ridge jitter {jitter:.0e} applied");
            }
            return Ok(ch);
        }
    }
    Err(Error::SolveFailure(
        "normal equations stayed singular under ridge jitter".into(),
    ))
}

/// Fits one autoregression per class on its 0/1 indicator; unlabeled
/// indicator entries are zero during the spatial filtering.
pub fn sar_fit(bundle: &DatasetBundle, labeled: &[usize]) -> Result<SarModel> {
    let ws = SarWorkspace::new(bundle, labeled)?;
    let q = bundle.n_classes();
    if q < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut per_class = Vec::with_capacity(q);
    for c in 0..q {
        let mut y = vec![0.0; bundle.n()];
        for &i in labeled {
            if bundle.labels[i] == c {
                y[i] = 1.0;
            }
        }
        per_class.push(ws.fit_target(bundle, &y, None)?);
    }
    Ok(SarModel { per_class })
}

/// Equilibrium membership scores (I − ρP)⁻¹[X, 1]w per class, for every
/// node. Columns align with class ids.
pub fn sar_scores(model: &SarModel, bundle: &DatasetBundle) -> Result<DMatrix<f64>> {
    let n = bundle.n();
    if n > DENSE_CAP {
        return Err(Error::invalid(format!(
            "{n} nodes exceed the dense autoregressive solve cap of {DENSE_CAP}"
        )));
    }
    let m = bundle.n_features();
    let p_dense = bundle.graph.transition_matrix()?.to_dense();
    let mut scores = DMatrix::zeros(n, model.per_class.len());
    for (c, fit) in model.per_class.iter().enumerate() {
        if fit.weights.len() != m + 1 {
            return Err(Error::invalid(format!(
                "class {c} fit has {} weights, dataset needs {}",
                fit.weights.len(),
                m + 1
            )));
        }
        let mut xb = DVector::from_element(n, fit.weights[m]);
        for i in 0..n {
            for j in 0..m {
                xb[i] += bundle.features[(i, j)] * fit.weights[j];
            }
        }
        let system = DMatrix::identity(n, n) - &p_dense * fit.rho;
        let solved = system.lu().solve(&xb).ok_or_else(|| {
            Error::SolveFailure(format!(
                "autoregressive system is singular at rho = {}",
                fit.rho
            ))
        })?;
        scores.set_column(c, &solved);
    }
    Ok(scores)
}

/// Highest-scoring class per node; ties go to the lowest class id.
pub fn sar_classify(model: &SarModel, bundle: &DatasetBundle) -> Result<Vec<usize>> {
    let scores = sar_scores(model, bundle)?;
    let mut out = Vec::with_capacity(bundle.n());
    for i in 0..bundle.n() {
        let mut best = 0usize;
        for c in 1..scores.ncols() {
            if scores[(i, c)] > scores[(i, best)] {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}
