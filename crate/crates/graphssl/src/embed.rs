//! Structural node embeddings from the four autocorrelation eigensystems.
//!
//! Each embedding packs p score vectors per node into an n × p matrix used
//! as extra features: Moran (largest eigenvectors of the centered adjacency,
//! most-autocorrelated directions first), Geary (smallest nontrivial
//! Laplacian eigenvectors, smoothest first), local PCA (smallest nontrivial
//! eigenvectors of (I−P)ᵀ(I−P)) and bag-of-paths modularity (largest
//! eigenvectors of the symmetrized Q_BoP).

use nalgebra::DMatrix;

use crate::bop::{bop_fundamental_capped, bop_modularity_matrix, DEFAULT_DENSE_CAP};
use crate::eigen::{
    symmetric_eigs, CenteredAdjacencyOp, LaplacianOp, SmoothnessOp, SymOp, Which,
};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbeddingKind {
    Moran,
    Geary,
    Lpca,
    BopModularity,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Moran => "moran",
            EmbeddingKind::Geary => "geary",
            EmbeddingKind::Lpca => "lpca",
            EmbeddingKind::BopModularity => "bopmod",
        }
    }

    pub fn parse(s: &str) -> Result<EmbeddingKind> {
        match s {
            "moran" => Ok(EmbeddingKind::Moran),
            "geary" => Ok(EmbeddingKind::Geary),
            "lpca" => Ok(EmbeddingKind::Lpca),
            "bopmod" => Ok(EmbeddingKind::BopModularity),
            other => Err(Error::invalid(format!(
                "unknown embedding kind {other:?} (expected moran, geary, lpca or bopmod)"
            ))),
        }
    }
}

/// What to extract: the kind, the number of score vectors as a fraction of
/// n, and the inverse temperature for the bag-of-paths kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    pub p_fraction: f64,
    pub theta: Option<f64>,
}

impl EmbeddingSpec {
    pub fn new(kind: EmbeddingKind, p_fraction: f64) -> Self {
        EmbeddingSpec {
            kind,
            p_fraction,
            theta: None,
        }
    }

    pub fn with_theta(kind: EmbeddingKind, p_fraction: f64, theta: f64) -> Self {
        EmbeddingSpec {
            kind,
            p_fraction,
            theta: Some(theta),
        }
    }

    /// p = round(p_fraction · n), at least 1; must leave room for the
    /// excluded trivial direction.
    pub fn p_for(&self, n: usize) -> Result<usize> {
        if !(self.p_fraction > 0.0 && self.p_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "score-vector fraction must lie in (0, 1), got {}",
                self.p_fraction
            )));
        }
        let p = ((self.p_fraction * n as f64).round() as usize).max(1);
        if p > n - 1 {
            return Err(Error::invalid(format!(
                "{p} score vectors requested but only {} nontrivial directions exist",
                n - 1
            )));
        }
        Ok(p)
    }
}

/// An extracted embedding: one column per score vector, most relevant first
/// (largest eigenvalue for Moran/BoP-modularity, smallest nontrivial for
/// Geary/LPCA).
#[derive(Debug, Clone)]
pub struct Embedding {
    pub kind: EmbeddingKind,
    pub scores: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Deterministic seed for the eigensolver start vectors; embeddings are a
/// pure function of (graph, spec).
const EMBED_SEED: u64 = 0x5eed_e16e;

/// Dispatches on the spec kind.
pub fn build_embedding(graph: &Graph, spec: &EmbeddingSpec) -> Result<Embedding> {
    match spec.kind {
        EmbeddingKind::Moran => moran_embedding(graph, spec),
        EmbeddingKind::Geary => geary_embedding(graph, spec),
        EmbeddingKind::Lpca => lpca_embedding(graph, spec),
        EmbeddingKind::BopModularity => bop_modularity_embedding(graph, spec),
    }
}

fn spectral_embedding(
    graph: &Graph,
    kind: EmbeddingKind,
    op: &dyn SymOp,
    which: Which,
    p: usize,
) -> Result<Embedding> {
    graph.require_connected("structural embeddings")?;
    let eigs = symmetric_eigs(op, p, which, true, EMBED_SEED)?;
    Ok(Embedding {
        kind,
        scores: eigs.vectors,
        eigenvalues: eigs.values,
    })
}

/// Largest eigenvectors of the centered adjacency HAH; the p most
/// Moran-autocorrelated orthogonal directions.
pub fn moran_embedding(graph: &Graph, spec: &EmbeddingSpec) -> Result<Embedding> {
    let p = spec.p_for(graph.n())?;
    let op = CenteredAdjacencyOp::new(graph);
    spectral_embedding(graph, EmbeddingKind::Moran, &op, Which::Largest, p)
}

/// Smallest nontrivial Laplacian eigenvectors; the p smoothest directions
/// in the Geary sense.
pub fn geary_embedding(graph: &Graph, spec: &EmbeddingSpec) -> Result<Embedding> {
    let p = spec.p_for(graph.n())?;
    let op = LaplacianOp::new(graph);
    spectral_embedding(
        graph,
        EmbeddingKind::Geary,
        &op,
        Which::SmallestNontrivial,
        p,
    )
}

/// Smallest nontrivial eigenvectors of (I−P)ᵀ(I−P); directions minimizing
/// the contiguity ratio.
pub fn lpca_embedding(graph: &Graph, spec: &EmbeddingSpec) -> Result<Embedding> {
    let p = spec.p_for(graph.n())?;
    let op = SmoothnessOp::new(graph);
    spectral_embedding(
        graph,
        EmbeddingKind::Lpca,
        &op,
        Which::SmallestNontrivial,
        p,
    )
}

/// Largest eigenvectors of the bag-of-paths modularity matrix. Q_BoP
/// annihilates the constant vector by construction, so the trivial
/// direction is deflated exactly as for the other kinds.
pub fn bop_modularity_embedding(graph: &Graph, spec: &EmbeddingSpec) -> Result<Embedding> {
    let theta = spec.theta.ok_or_else(|| {
        Error::invalid("bag-of-paths modularity embedding needs an inverse temperature")
    })?;
    let p = spec.p_for(graph.n())?;
    let ctx = bop_fundamental_capped(graph, theta, DEFAULT_DENSE_CAP)?;
    let q = bop_modularity_matrix(&ctx);
    // Dense symmetric decomposition: Z is dense anyway, so nothing is saved
    // by iterating.
    let eig = nalgebra::SymmetricEigen::new(q);
    let n = graph.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let inv_n = 1.0 / n as f64;
    let mut scores = DMatrix::zeros(n, p);
    let mut values = Vec::with_capacity(p);
    let mut kept = 0;
    for &idx in &order {
        if kept == p {
            break;
        }
        // Project out the constant direction; degenerate null subspaces can
        // smear e across several basis vectors, so re-orthonormalize against
        // the kept columns and skip vanishing candidates.
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().cloned().collect();
        let mean: f64 = v.iter().sum::<f64>() * inv_n;
        for x in &mut v {
            *x -= mean;
        }
        for c in 0..kept {
            let dot: f64 = (0..n).map(|i| scores[(i, c)] * v[i]).sum();
            for i in 0..n {
                v[i] -= dot * scores[(i, c)];
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for i in 0..n {
            scores[(i, kept)] = v[i] / norm;
        }
        values.push(eig.eigenvalues[idx]);
        kept += 1;
    }
    if kept < p {
        return Err(Error::invalid(format!(
            "{p} score vectors requested but only {kept} nontrivial directions exist"
        )));
    }
    for c in 0..p {
        fix_column_sign(&mut scores, c);
    }
    Ok(Embedding {
        kind: EmbeddingKind::BopModularity,
        scores,
        eigenvalues: values,
    })
}

fn fix_column_sign(m: &mut DMatrix<f64>, col: usize) {
    let n = m.nrows();
    let mut best = 0;
    for i in 1..n {
        if m[(i, col)].abs() > m[(best, col)].abs() {
            best = i;
        }
    }
    if m[(best, col)] < 0.0 {
        for i in 0..n {
            m[(i, col)] = -m[(i, col)];
        }
    }
}

/// Writes an embedding as TSV: node id followed by the p scores.
pub fn write_embedding_tsv(embedding: &Embedding, path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..embedding.scores.nrows() {
        out.push_str(&i.to_string());
        for j in 0..embedding.scores.ncols() {
            out.push('\t');
            out.push_str(&format!("{}", embedding.scores[(i, j)]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
