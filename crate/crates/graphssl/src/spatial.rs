//! Spatial autocorrelation indexes on node-valued vectors.
//!
//! Three scalar diagnostics of how strongly a quantity defined on the nodes
//! follows the graph structure: Moran's I (covariance flavored), Geary's c
//! (difference flavored) and the contiguity ratio behind local PCA. Each is
//! also evaluated on every class-indicator vector to produce the dataset
//! diagnostic separating graph-driven from feature-driven datasets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::io::DatasetBundle;
use crate::graph::Graph;

/// Per-class and averaged autocorrelation of the class-membership
/// indicators of a dataset.
#[derive(Debug, Clone, Serialize)]
pub struct AutocorrReport {
    pub class_names: Vec<String>,
    pub moran_per_class: Vec<f64>,
    pub geary_per_class: Vec<f64>,
    pub contiguity_per_class: Vec<f64>,
    pub moran_mean: f64,
    pub geary_mean: f64,
    pub contiguity_mean: f64,
}

fn centered(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if ss <= 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((c, ss))
}

/// Moran's I: I(x) = (n/a••) · Σᵢⱼ a_ij (x_i−x̄)(x_j−x̄) / Σᵢ (x_i−x̄)².
///
/// Positive when neighbors deviate from the mean on the same side, negative
/// when they alternate.
pub fn moran_index(graph: &Graph, x: &[f64]) -> Result<f64> {
    check_len(graph, x)?;
    let (c, ss) = centered(x)?;
    let n = x.len() as f64;
    let cross: f64 = graph
        .adjacency()
        .iter()
        .map(|(i, j, a)| a * c[i] * c[j])
        .sum();
    Ok((n / graph.volume()) * cross / ss)
}

/// Geary's c: c(x) = (n−1)/(2a••) · Σᵢⱼ a_ij (x_i−x_j)² / Σᵢ (x_i−x̄)².
///
/// Values below 1 indicate positive autocorrelation (neighbors similar),
/// above 1 negative.
pub fn geary_index(graph: &Graph, x: &[f64]) -> Result<f64> {
    check_len(graph, x)?;
    let (_, ss) = centered(x)?;
    let n = x.len() as f64;
    let diff: f64 = graph
        .adjacency()
        .iter()
        .map(|(i, j, a)| {
            let d = x[i] - x[j];
            a * d * d
        })
        .sum();
    Ok((n - 1.0) / (2.0 * graph.volume()) * diff / ss)
}

/// Contiguity ratio: cr(x) = Σᵢ (x_i − m_i)² / Σᵢ (x_i − x̄)², where m_i is
/// the transition-weighted neighborhood average Σⱼ p_ij x_j.
///
/// Zero when every node equals its neighborhood average; small values mean
/// strong local smoothness.
pub fn contiguity_ratio(graph: &Graph, x: &[f64]) -> Result<f64> {
    check_len(graph, x)?;
    let (_, ss) = centered(x)?;
    let m = graph.transition_matrix()?.mul_vec(x);
    let num: f64 = x.iter().zip(&m).map(|(xi, mi)| (xi - mi).powi(2)).sum();
    Ok(num / ss)
}

fn check_len(graph: &Graph, x: &[f64]) -> Result<()> {
    if x.len() != graph.n() {
        return Err(Error::invalid(format!(
            "vector length {} does not match graph order {}",
            x.len(),
            graph.n()
        )));
    }
    Ok(())
}

/// Evaluates all three indexes on each binary class indicator yᶜ and
/// averages over classes.
pub fn class_autocorrelation_report(bundle: &DatasetBundle) -> Result<AutocorrReport> {
    let k = bundle.n_classes();
    if k < 2 {
        return Err(Error::invalid("autocorrelation report needs >= 2 classes"));
    }
    let mut moran = Vec::with_capacity(k);
    let mut geary = Vec::with_capacity(k);
    let mut contiguity = Vec::with_capacity(k);
    for class in 0..k {
        let y = bundle.class_indicator(class);
        if !y.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid(format!(
                "class {:?} has no members",
                bundle.class_names[class]
            )));
        }
        moran.push(moran_index(&bundle.graph, &y)?);
        geary.push(geary_index(&bundle.graph, &y)?);
        contiguity.push(contiguity_ratio(&bundle.graph, &y)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(AutocorrReport {
        class_names: bundle.class_names.clone(),
        moran_mean: mean(&moran),
        geary_mean: mean(&geary),
        contiguity_mean: mean(&contiguity),
        moran_per_class: moran,
        geary_per_class: geary,
        contiguity_per_class: contiguity,
    })
}

impl AutocorrReport {
    /// Aligned text table, one row per class plus the mean row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .class_names
            .iter()
            .map(|s| s.len())
            .chain([5])
            .max()
            .unwrap();
        out.push_str(&format!(
            "{:width$}  {:>10}  {:>10}  {:>10}\n",
            "class", "moran", "geary", "lpca-cr"
        ));
        for (i, name) in self.class_names.iter().enumerate() {
            out.push_str(&format!(
                "{:width$}  {:>10.4}  {:>10.4}  {:>10.4}\n",
                name, self.moran_per_class[i], self.geary_per_class[i], self.contiguity_per_class[i]
            ));
        }
        out.push_str(&format!(
            "{:width$}  {:>10.4}  {:>10.4}  {:>10.4}\n",
            "mean", self.moran_mean, self.geary_mean, self.contiguity_mean
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k2() -> Graph {
        Graph::from_unit_edges(2, &[(0, 1)])
    }

    fn path3() -> Graph {
        Graph::from_unit_edges(3, &[(0, 1), (1, 2)])
    }

    fn triangle() -> Graph {
        Graph::from_unit_edges(3, &[(0, 1), (1, 2), (2, 0)])
    }

    #[test]
    fn moran_hand_values() {
        assert_relative_eq!(moran_index(&k2(), &[1.0, -1.0]).unwrap(), -1.0);
        assert_relative_eq!(
            moran_index(&path3(), &[1.0, 0.0, -1.0]).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(moran_index(&triangle(), &[1.0, 0.0, -1.0]).unwrap(), -0.5);
    }

    #[test]
    fn geary_hand_values() {
        assert_relative_eq!(geary_index(&path3(), &[1.0, 0.0, -1.0]).unwrap(), 0.5);
        assert_relative_eq!(geary_index(&k2(), &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn contiguity_hand_values() {
        assert_relative_eq!(contiguity_ratio(&path3(), &[1.0, 0.0, -1.0]).unwrap(), 1.0);
        assert_relative_eq!(contiguity_ratio(&k2(), &[1.0, -1.0]).unwrap(), 4.0);
    }

    #[test]
    fn constant_vector_rejected() {
        assert!(matches!(
            moran_index(&k2(), &[3.0, 3.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(geary_index(&k2(), &[0.0, 0.0]).is_err());
        assert!(contiguity_ratio(&k2(), &[-2.0, -2.0]).is_err());
    }

    #[test]
    fn geary_direct_summation_oracle() {
        // Brute-force the defining sums on an irregular weighted graph.
        let g = Graph::from_adjacency_triplets(
            4,
            vec![
                (0, 1, 2.0),
                (1, 0, 2.0),
                (1, 2, 0.5),
                (2, 1, 0.5),
                (2, 3, 1.0),
                (3, 2, 1.0),
                (0, 3, 3.0),
                (3, 0, 3.0),
            ],
        )
        .unwrap();
        let x = [0.3, -1.2, 2.0, 0.7];
        let a = g.adjacency().to_dense();
        let n = 4.0;
        let vol: f64 = a.iter().sum();
        let mean = x.iter().sum::<f64>() / n;
        let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let mut diff = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                diff += a[(i, j)] * (x[i] - x[j]).powi(2);
            }
        }
        let expected = (n - 1.0) / (2.0 * vol) * diff / ss;
        assert_relative_eq!(geary_index(&g, &x).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn report_means_over_indicators() {
        use nalgebra::DMatrix;
        // Two cliques joined by one edge: indicators strongly autocorrelated.
        let g = Graph::from_unit_edges(
            6,
            &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)],
        );
        let bundle = DatasetBundle {
            name: "toy".into(),
            graph: g,
            features: DMatrix::zeros(6, 1),
            labels: vec![0, 0, 0, 1, 1, 1],
            class_names: vec!["a".into(), "b".into()],
        };
        let report = class_autocorrelation_report(&bundle).unwrap();
        assert_eq!(report.moran_per_class.len(), 2);
        // Symmetric construction: both indicators give identical numbers.
        assert_relative_eq!(report.moran_per_class[0], report.moran_per_class[1]);
        assert!(report.moran_mean > 0.3);
        assert!(report.geary_mean < 0.7);
        let table = report.to_table();
        assert!(table.contains("mean"));
    }
}
