//! Linear SVM trained by dual coordinate descent, with one-vs-one
//! multiclass voting.
//!
//! The binary subproblem is the L1 hinge-loss dual: minimize
//! ½αᵀQ̄α − eᵀα over the box [0, C]ⁿ, solved coordinate-wise over seeded
//! random permutations with shrinking. The bias is an augmented constant
//! feature, so w has one extra trailing component. Convergence is declared
//! on the primal–dual gap.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{self, mix_seed, Parallelism};

#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    /// Margin penalty.
    pub c: f64,
    /// Base seed for the coordinate permutations.
    pub seed: u64,
    pub max_epochs: usize,
    /// Relative duality-gap tolerance.
    pub tol: f64,
}

impl SvmParams {
    pub fn new(c: f64, seed: u64) -> Self {
        SvmParams {
            c,
            seed,
            max_epochs: 1000,
            tol: 1e-4,
        }
    }
}

/// One-vs-one linear SVM. `pairs[k]` holds the hyperplane for the k-th
/// class pair (a, b) with a < b: positive decision values vote a.
#[derive(Debug, Clone)]
pub struct LinearSvmModel {
    dim: usize,
    classes: Vec<usize>,
    pairs: Vec<PairModel>,
    /// Set when training saw a single class; every prediction returns it.
    constant: Option<usize>,
}

#[derive(Debug, Clone)]
struct PairModel {
    class_pos: usize,
    class_neg: usize,
    /// Length dim + 1; the last entry is the bias.
    w: Vec<f64>,
}

/// Trains the one-vs-one model. Rows of `x` are samples aligned with `y`.
/// A single-class training set yields a constant predictor and a warning
/// rather than an error.
pub fn train_linear_svm(
    x: &DMatrix<f64>,
    y: &[usize],
    params: &SvmParams,
) -> Result<LinearSvmModel> {
    train_linear_svm_par(x, y, params, Parallelism::Sequential)
}

/// As [`train_linear_svm`] with the pair subproblems dispatched per the
/// execution mode (their results are independent of scheduling).
pub fn train_linear_svm_par(
    x: &DMatrix<f64>,
    y: &[usize],
    params: &SvmParams,
    mode: Parallelism,
) -> Result<LinearSvmModel> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "{} samples but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("empty training set"));
    }
    if !(params.c > 0.0) {
        return Err(Error::invalid(format!(
            "margin penalty must be positive, got {}",
            params.c
        )));
    }
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let dim = x.ncols();
    if classes.len() == 1 {
        log::warn!(
            "training set contains a single class ({}); returning a constant predictor",
            classes[0]
        );
        return Ok(LinearSvmModel {
            dim,
            constant: Some(classes[0]),
            classes,
            pairs: Vec::new(),
        });
    }

    // Contiguous augmented samples, one slice per row.
    let stride = dim + 1;
    let mut flat = vec![0.0; x.nrows() * stride];
    for i in 0..x.nrows() {
        for j in 0..dim {
            flat[i * stride + j] = x[(i, j)];
        }
        flat[i * stride + dim] = 1.0;
    }

    let mut tasks = Vec::new();
    for a in 0..classes.len() {
        for b in (a + 1)..classes.len() {
            tasks.push((classes[a], classes[b]));
        }
    }
    let pairs: Vec<Result<PairModel>> = exec::map_indexed(mode, tasks.len(), |k| {
        let (ca, cb) = tasks[k];
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == ca || y[i] == cb).collect();
        let labels: Vec<f64> = rows
            .iter()
            .map(|&i| if y[i] == ca { 1.0 } else { -1.0 })
            .collect();
        let seed = mix_seed(params.seed, k as u64);
        let w = train_binary(&flat, stride, &rows, &labels, params, seed)?;
        Ok(PairModel {
            class_pos: ca,
            class_neg: cb,
            w,
        })
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LinearSvmModel {
        dim,
        classes,
        pairs,
        constant: None,
    })
}

/// Dual coordinate descent on one binary subproblem. Returns the augmented
/// weight vector.
fn train_binary(
    flat: &[f64],
    stride: usize,
    rows: &[usize],
    labels: &[f64],
    params: &SvmParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = rows.len();
    let c = params.c;
    let sample = |i: usize| -> &[f64] { &flat[rows[i] * stride..(rows[i] + 1) * stride] };
    // Q̄_ii = ‖x̃_i‖²; a zero row still has the augmented 1.
    let qdiag: Vec<f64> = (0..n)
        .map(|i| sample(i).iter().map(|v| v * v).sum::<f64>())
        .collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; stride];
    let mut active: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Shrinking thresholds from the previous epoch's projected gradients.
    let mut pg_max_prev = f64::INFINITY;
    let mut pg_min_prev = f64::NEG_INFINITY;

    for _epoch in 0..params.max_epochs {
        active.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        let mut idx = 0;
        while idx < active.len() {
            let i = active[idx];
            let xi = sample(i);
            let yi = labels[i];
            let g = yi * dot(&w, xi) - 1.0;
            // Shrink confidently-bounded coordinates for this epoch.
            if alpha[i] == 0.0 && g > pg_max_prev {
                active.swap_remove(idx);
                continue;
            }
            if alpha[i] == c && g < pg_min_prev {
                active.swap_remove(idx);
                continue;
            }
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qdiag[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * yi;
                if delta != 0.0 {
                    for (wk, xk) in w.iter_mut().zip(xi) {
                        *wk += delta * xk;
                    }
                }
            }
            idx += 1;
        }
        pg_max_prev = if pg_max.is_finite() { pg_max.max(0.0) } else { f64::INFINITY };
        pg_min_prev = if pg_min.is_finite() { pg_min.min(0.0) } else { f64::NEG_INFINITY };

        // Primal–dual gap over the full sample set.
        let norm2: f64 = w.iter().map(|v| v * v).sum();
        let mut hinge = 0.0;
        for i in 0..n {
            hinge += (1.0 - labels[i] * dot(&w, sample(i))).max(0.0);
        }
        let primal = 0.5 * norm2 + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm2;
        let gap = primal - dual;
        if gap <= params.tol * primal.abs().max(1.0) {
            return Ok(w);
        }
        if active.is_empty() {
            // Everything shrunk but the gap persists: restart unshrunk.
            active = (0..n).collect();
            pg_max_prev = f64::INFINITY;
            pg_min_prev = f64::NEG_INFINITY;
        }
    }
    log::warn!(
        "dual coordinate descent hit the epoch cap ({}) before closing the duality gap",
        params.max_epochs
    );
    Ok(w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSvmModel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Predicts the class of each row by one-vs-one majority vote; vote ties
    /// go to the lowest class id.
    pub fn predict_rows(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.dim {
            return Err(Error::invalid(format!(
                "expected {} feature columns, got {}",
                self.dim,
                x.ncols()
            )));
        }
        if let Some(class) = self.constant {
            return Ok(vec![class; x.nrows()]);
        }
        let mut out = Vec::with_capacity(x.nrows());
        let mut row = vec![0.0; self.dim];
        for i in 0..x.nrows() {
            for j in 0..self.dim {
                row[j] = x[(i, j)];
            }
            out.push(self.predict_one(&row));
        }
        Ok(out)
    }

    /// Predicts a single already-assembled feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!(
                "expected {} feature columns, got {}",
                self.dim,
                row.len()
            )));
        }
        if let Some(class) = self.constant {
            return Ok(class);
        }
        Ok(self.predict_one(row))
    }

    /// Per-row one-vs-one vote shares, columns aligned with [`classes`];
    /// each row sums to 1. A constant model puts all mass on its class.
    ///
    /// [`classes`]: LinearSvmModel::classes
    pub fn vote_shares(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim {
            return Err(Error::invalid(format!(
                "expected {} feature columns, got {}",
                self.dim,
                x.ncols()
            )));
        }
        let q = self.classes.len();
        let mut out = DMatrix::zeros(x.nrows(), q);
        if self.constant.is_some() || self.pairs.is_empty() {
            for i in 0..x.nrows() {
                out[(i, 0)] = 1.0;
            }
            return Ok(out);
        }
        let total = self.pairs.len() as f64;
        let mut row = vec![0.0; self.dim];
        for i in 0..x.nrows() {
            for j in 0..self.dim {
                row[j] = x[(i, j)];
            }
            for pair in &self.pairs {
                let f = dot(&pair.w[..self.dim], &row) + pair.w[self.dim];
                let winner = if f >= 0.0 { pair.class_pos } else { pair.class_neg };
                let col = self.classes.binary_search(&winner).unwrap();
                out[(i, col)] += 1.0 / total;
            }
        }
        Ok(out)
    }

    fn predict_one(&self, row: &[f64]) -> usize {
        let mut votes: Vec<(usize, usize)> = self.classes.iter().map(|&c| (c, 0)).collect();
        for pair in &self.pairs {
            let f = dot(&pair.w[..self.dim], row) + pair.w[self.dim];
            let winner = if f >= 0.0 { pair.class_pos } else { pair.class_neg };
            for v in &mut votes {
                if v.0 == winner {
                    v.1 += 1;
                }
            }
        }
        // Highest vote count; classes are in ascending id order, so the
        // first maximum is the lowest id.
        votes
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .unwrap()
            .0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn separable_1d_margin() {
        let x = mat(&[&[-1.0], &[1.0]]);
        let model = train_linear_svm(&x, &[1, 2], &SvmParams::new(1.0, 0)).unwrap();
        let pred = model.predict_rows(&mat(&[&[0.5]])).unwrap();
        assert_eq!(pred, vec![2]);
        let pred = model.predict_rows(&mat(&[&[-0.5]])).unwrap();
        assert_eq!(pred, vec![1]);
    }

    #[test]
    fn one_vs_one_pair_count() {
        let x = mat(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let model = train_linear_svm(&x, &[0, 1, 2], &SvmParams::new(1.0, 0)).unwrap();
        assert_eq!(model.n_pairs(), 3);
    }

    #[test]
    fn separable_blobs_perfect_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..30 {
            rows.push(vec![rng.gen::<f64>() - 4.0, rng.gen::<f64>()]);
            labels.push(0usize);
            rows.push(vec![rng.gen::<f64>() + 4.0, rng.gen::<f64>()]);
            labels.push(1usize);
        }
        let x = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        let model = train_linear_svm(&x, &labels, &SvmParams::new(10.0, 1)).unwrap();
        let pred = model.predict_rows(&x).unwrap();
        assert_eq!(pred, labels);
    }

    #[test]
    fn three_class_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let centers = [(-5.0, 0.0), (5.0, 0.0), (0.0, 6.0)];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            for _ in 0..20 {
                rows.push(vec![cx + rng.gen::<f64>(), cy + rng.gen::<f64>()]);
                labels.push(c);
            }
        }
        let x = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        let model = train_linear_svm(&x, &labels, &SvmParams::new(10.0, 2)).unwrap();
        let pred = model.predict_rows(&x).unwrap();
        let correct = pred.iter().zip(&labels).filter(|(a, b)| a == b).count();
        assert_eq!(correct, labels.len());
    }

    #[test]
    fn single_class_constant_predictor() {
        let x = mat(&[&[1.0], &[2.0]]);
        let model = train_linear_svm(&x, &[3, 3], &SvmParams::new(1.0, 0)).unwrap();
        let pred = model.predict_rows(&mat(&[&[-9.0], &[9.0]])).unwrap();
        assert_eq!(pred, vec![3, 3]);
    }

    #[test]
    fn parallel_mode_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(40, 3, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let y: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let params = SvmParams::new(1.0, 5);
        let seq = train_linear_svm_par(&x, &y, &params, Parallelism::Sequential).unwrap();
        let par = train_linear_svm_par(&x, &y, &params, Parallelism::Rayon).unwrap();
        let probe = DMatrix::from_fn(15, 3, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        assert_eq!(
            seq.predict_rows(&probe).unwrap(),
            par.predict_rows(&probe).unwrap()
        );
        // Bitwise identical weights: the pair subproblems are independent.
        for (a, b) in seq.pairs.iter().zip(&par.pairs) {
            assert_eq!(a.w, b.w);
        }
    }

    #[test]
    fn scaling_a_feature_block_keeps_separable_predictions() {
        let x = mat(&[&[-2.0, 0.3], &[-1.5, -0.2], &[1.5, 0.1], &[2.0, -0.3]]);
        let y = [0usize, 0, 1, 1];
        let params = SvmParams::new(10.0, 3);
        let base = train_linear_svm(&x, &y, &params).unwrap();
        let mut xs = x.clone();
        for i in 0..xs.nrows() {
            xs[(i, 1)] *= 7.0;
        }
        let scaled = train_linear_svm(&xs, &y, &params).unwrap();
        let probe = mat(&[&[-1.0, 0.0], &[1.0, 0.2], &[3.0, -0.1]]);
        let mut probe_s = probe.clone();
        for i in 0..probe_s.nrows() {
            probe_s[(i, 1)] *= 7.0;
        }
        assert_eq!(
            base.predict_rows(&probe).unwrap(),
            scaled.predict_rows(&probe_s).unwrap()
        );
    }

    #[test]
    fn invalid_inputs_rejected() {
        let x = mat(&[&[1.0]]);
        assert!(train_linear_svm(&x, &[0, 1], &SvmParams::new(1.0, 0)).is_err());
        assert!(train_linear_svm(&x, &[0], &SvmParams::new(0.0, 0)).is_err());
        let model = train_linear_svm(&x, &[0], &SvmParams::new(1.0, 0)).unwrap();
        assert!(model.predict_rows(&mat(&[&[1.0, 2.0]])).is_err());
    }
}
