//! Feature-block composition with leak-free standardization.
//!
//! SVM-based methods consume column-concatenated blocks (node features,
//! structural embeddings, kernel rows). Each block column is standardized
//! to zero mean and unit variance using statistics from the labeled rows
//! only — the transform is then applied to every row, which is legitimate
//! in the transductive setting where unlabeled feature values are
//! observable but their labels are not.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// The fitted standardization: which concatenated raw columns survive and
/// the per-column affine map. Lets a caller re-standardize a freshly
/// assembled raw row without rebuilding the whole matrix.
#[derive(Debug, Clone)]
pub struct ColumnTransform {
    /// Raw (concatenated) width the transform expects.
    raw_width: usize,
    /// (raw column index, mean, 1/std) per kept column, in output order.
    kept: Vec<(usize, f64, f64)>,
}

impl ColumnTransform {
    pub fn raw_width(&self) -> usize {
        self.raw_width
    }

    pub fn out_width(&self) -> usize {
        self.kept.len()
    }

    /// Standardizes one raw row (all blocks concatenated) into the output
    /// column space.
    pub fn apply_row(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.raw_width {
            return Err(Error::invalid(format!(
                "raw row has {} entries, transform expects {}",
                raw.len(),
                self.raw_width
            )));
        }
        Ok(self
            .kept
            .iter()
            .map(|&(src, mean, inv_std)| (raw[src] - mean) * inv_std)
            .collect())
    }
}

/// Concatenates the given blocks column-wise after standardizing each
/// column on the labeled rows. Columns with zero variance over the labeled
/// rows carry no signal and are dropped with a warning.
pub fn compose_features(
    parts: &[DMatrix<f64>],
    labeled_rows: &[usize],
) -> Result<DMatrix<f64>> {
    compose_features_with_transform(parts, labeled_rows).map(|(m, _)| m)
}

/// As [`compose_features`], also returning the fitted transform.
pub fn compose_features_with_transform(
    parts: &[DMatrix<f64>],
    labeled_rows: &[usize],
) -> Result<(DMatrix<f64>, ColumnTransform)> {
    if parts.is_empty() {
        return Err(Error::invalid("no feature blocks given"));
    }
    if labeled_rows.is_empty() {
        return Err(Error::invalid("no labeled rows to standardize on"));
    }
    let n = parts[0].nrows();
    for (k, p) in parts.iter().enumerate() {
        if p.nrows() != n {
            return Err(Error::invalid(format!(
                "feature block {k} has {} rows, expected {n}",
                p.nrows()
            )));
        }
    }
    for &r in labeled_rows {
        if r >= n {
            return Err(Error::invalid(format!(
                "labeled row {r} out of range for {n} rows"
            )));
        }
    }

    let nl = labeled_rows.len() as f64;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut kept: Vec<(usize, f64, f64)> = Vec::new();
    let mut dropped = 0usize;
    let mut raw_index = 0usize;
    for part in parts {
        for j in 0..part.ncols() {
            let mean: f64 = labeled_rows.iter().map(|&r| part[(r, j)]).sum::<f64>() / nl;
            let var: f64 = labeled_rows
                .iter()
                .map(|&r| (part[(r, j)] - mean).powi(2))
                .sum::<f64>()
                / nl;
            let std = var.sqrt();
            if std <= 1e-12 {
                dropped += 1;
            } else {
                let inv_std = 1.0 / std;
                kept.push((raw_index, mean, inv_std));
                columns.push((0..n).map(|i| (part[(i, j)] - mean) * inv_std).collect());
            }
            raw_index += 1;
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} feature column(s) with zero variance over the labeled rows");
    }
    let mut out = DMatrix::zeros(n, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok((
        out,
        ColumnTransform {
            raw_width: raw_index,
            kept,
        },
    ))
}
