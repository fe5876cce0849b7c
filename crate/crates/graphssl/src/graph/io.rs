//! Dataset-directory loading and writing.
//!
//! A dataset lives in a directory holding `edges.tsv` (src TAB dst TAB
//! weight, 0-based ids), a feature table (`features.tsv` sparse triplets or
//! `features.dense.csv`), and `labels.tsv` (node TAB class). Loading builds
//! the preprocessed graph (symmetrized, largest component) and restricts
//! features and labels to the surviving nodes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{build_graph, BuildOptions, Graph};

/// A loaded dataset: graph, node features and full ground-truth labels.
///
/// Labels cover every node; the evaluation harness decides which of them a
/// classifier is allowed to see.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    /// n × m node-feature matrix (rows aligned with graph node ids).
    pub features: DMatrix<f64>,
    /// Dense class index per node.
    pub labels: Vec<usize>,
    /// Original class names, indexed by dense class index.
    pub class_names: Vec<String>,
}

impl DatasetBundle {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// One-hot indicator vector for a class (length n, entries 0/1).
    pub fn class_indicator(&self, class: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { 0.0 })
            .collect()
    }

    /// Replaces the feature matrix by the given column subset, in order.
    pub fn with_feature_columns(&self, columns: &[usize]) -> DatasetBundle {
        let mut out = self.clone();
        out.features = self.features.select_columns(columns.iter());
        out
    }
}

fn parse_fields<'a>(line: &'a str, sep: char, want: usize, what: &str, lineno: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split(sep).collect();
    if fields.len() != want {
        return Err(Error::Parse(format!(
            "{what} line {lineno}: expected {want} fields, got {}",
            fields.len()
        )));
    }
    Ok(fields)
}

fn parse_usize(s: &str, what: &str, lineno: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what} line {lineno}: bad integer {s:?}")))
}

fn parse_f64(s: &str, what: &str, lineno: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{what} line {lineno}: bad number {s:?}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!(
            "{what} line {lineno}: non-finite value {s:?}"
        )));
    }
    Ok(v)
}

/// Loads a dataset directory, applying the standard graph preprocessing
/// (symmetrization, largest connected component). Features and labels are
/// re-indexed onto the surviving nodes; a surviving node without a label or
/// feature row is an error.
pub fn load_dataset_dir(dir: &Path) -> Result<DatasetBundle> {
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let edges_path = dir.join("edges.tsv");
    let edges_text = fs::read_to_string(&edges_path)?;
    let mut edges = Vec::new();
    for (idx, line) in edges_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_fields(line, '\t', 3, "edges.tsv", idx + 1)?;
        edges.push((
            parse_usize(f[0], "edges.tsv", idx + 1)?,
            parse_usize(f[1], "edges.tsv", idx + 1)?,
            parse_f64(f[2], "edges.tsv", idx + 1)?,
        ));
    }
    let built = build_graph(&edges, BuildOptions::default())?;
    let n = built.graph.n();

    // Labels: old node id → class name.
    let labels_text = fs::read_to_string(dir.join("labels.tsv"))?;
    let mut raw_labels: BTreeMap<usize, String> = BTreeMap::new();
    for (idx, line) in labels_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_fields(line, '\t', 2, "labels.tsv", idx + 1)?;
        let node = parse_usize(f[0], "labels.tsv", idx + 1)?;
        raw_labels.insert(node, f[1].trim().to_string());
    }
    let mut class_names: Vec<String> = raw_labels.values().cloned().collect();
    class_names.sort();
    class_names.dedup();
    let class_index: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut labels = vec![usize::MAX; n];
    for (&old, new) in &built.node_map {
        let Some(class) = raw_labels.get(&old) else {
            return Err(Error::invalid(format!("node {old} has no label")));
        };
        labels[*new] = class_index[class.as_str()];
    }

    // Features: sparse triplets preferred, dense CSV fallback.
    let sparse_path = dir.join("features.tsv");
    let dense_path = dir.join("features.dense.csv");
    let features = if sparse_path.exists() {
        let text = fs::read_to_string(&sparse_path)?;
        let mut triplets = Vec::new();
        let mut m = 0usize;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f = parse_fields(line, '\t', 3, "features.tsv", idx + 1)?;
            let node = parse_usize(f[0], "features.tsv", idx + 1)?;
            let feat = parse_usize(f[1], "features.tsv", idx + 1)?;
            let val = parse_f64(f[2], "features.tsv", idx + 1)?;
            m = m.max(feat + 1);
            if let Some(&new) = built.node_map.get(&node) {
                triplets.push((new, feat, val));
            }
        }
        let mut mat = DMatrix::zeros(n, m);
        for (row, col, val) in triplets {
            mat[(row, col)] += val;
        }
        mat
    } else if dense_path.exists() {
        let text = fs::read_to_string(&dense_path)?;
        let mut rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut m = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| parse_f64(s, "features.dense.csv", idx + 1))
                .collect::<Result<_>>()?;
            match m {
                None => m = Some(vals.len()),
                Some(width) if width != vals.len() => {
                    return Err(Error::Parse(format!(
                        "features.dense.csv line {}: ragged row ({} vs {width} columns)",
                        idx + 1,
                        vals.len()
                    )));
                }
                _ => {}
            }
            rows.insert(idx, vals);
        }
        let m = m.ok_or_else(|| Error::invalid("features.dense.csv is empty"))?;
        let mut mat = DMatrix::zeros(n, m);
        for (&old, &new) in &built.node_map {
            let Some(vals) = rows.get(&old) else {
                return Err(Error::invalid(format!(
                    "features.dense.csv has no row for node {old}"
                )));
            };
            for (j, &v) in vals.iter().enumerate() {
                mat[(new, j)] = v;
            }
        }
        mat
    } else {
        return Err(Error::invalid(format!(
            "neither features.tsv nor features.dense.csv found in {}",
            dir.display()
        )));
    };

    Ok(DatasetBundle {
        name,
        graph: built.graph,
        features,
        labels,
        class_names,
    })
}

/// Writes a bundle back out in the directory layout `load_dataset_dir`
/// reads (sparse feature triplets). Used by the synthetic-dataset generator
/// and round-trip tests.
pub fn write_dataset_dir(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    // Both directions are written so that the loader's symmetrization
    // (Aᵀ+A)/2 reproduces the stored weights exactly.
    let mut edges = String::new();
    for (i, j, w) in bundle.graph.adjacency().iter() {
        edges.push_str(&format!("{i}\t{j}\t{w}\n"));
    }
    fs::write(dir.join("edges.tsv"), edges)?;

    let mut feats = String::new();
    for i in 0..bundle.n() {
        for j in 0..bundle.n_features() {
            let v = bundle.features[(i, j)];
            if v != 0.0 {
                feats.push_str(&format!("{i}\t{j}\t{v}\n"));
            }
        }
    }
    // A node whose features are all zero still needs the column count to
    // round-trip; pin it with an explicit zero in the last column.
    if bundle.n_features() > 0 {
        let last = bundle.n_features() - 1;
        if (0..bundle.n()).all(|i| bundle.features[(i, last)] == 0.0) {
            feats.push_str(&format!("0\t{last}\t0\n"));
        }
    }
    fs::write(dir.join("features.tsv"), feats)?;

    let mut labels = String::new();
    for (i, &l) in bundle.labels.iter().enumerate() {
        labels.push_str(&format!("{i}\t{}\n", bundle.class_names[l]));
    }
    fs::write(dir.join("labels.tsv"), labels)?;
    Ok(())
}
