//! Canonical undirected weighted graph and its derived matrix views.
//!
//! A [`Graph`] owns a symmetric nonnegative adjacency matrix with zero
//! diagonal and a cost value on every edge (reciprocal affinity by default).
//! Degree, Laplacian and transition views are computed from it on demand;
//! the graph itself is immutable after construction and safe to share across
//! threads.

pub mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Weights below this are treated as absent edges so that reciprocal costs
/// stay finite.
pub const MIN_EDGE_WEIGHT: f64 = 1e-12;

/// Options for [`build_graph`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Replace A by (Aᵀ + A)/2. When false the input must already be
    /// symmetric.
    pub symmetrize: bool,
    /// Keep only the largest connected component and remap ids densely.
    pub keep_largest_component: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            symmetrize: true,
            keep_largest_component: true,
        }
    }
}

/// Undirected weighted graph with per-edge transition costs.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Csr,
    /// Cost values aligned entry-for-entry with `adjacency` storage. A cost
    /// is defined exactly where an edge exists.
    costs: Csr,
    degrees: Vec<f64>,
}

/// Result of [`build_graph`]: the graph plus the old-id → new-id map of the
/// surviving nodes.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: Graph,
    pub node_map: BTreeMap<usize, usize>,
}

/// Builds a graph from weighted edge triples.
///
/// Self-loops are dropped, duplicate arcs are summed, and weights below
/// [`MIN_EDGE_WEIGHT`] are treated as absent. With `symmetrize` the adjacency
/// becomes (Aᵀ + A)/2; with `keep_largest_component` only the largest
/// connected component survives (ties broken toward the component containing
/// the smallest node id) and ids are remapped densely in ascending old-id
/// order.
pub fn build_graph(edges: &[(usize, usize, f64)], options: BuildOptions) -> Result<GraphBuild> {
    if edges.is_empty() {
        return Err(Error::invalid("empty edge list"));
    }
    for &(src, dst, w) in edges {
        if w < 0.0 {
            return Err(Error::invalid(format!(
                "negative weight {w} on edge ({src}, {dst})"
            )));
        }
    }

    let n_raw = edges
        .iter()
        .map(|&(s, d, _)| s.max(d))
        .max()
        .unwrap()
        + 1;

    // Accumulate directed weights, dropping self-loops.
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(src, dst, w) in edges {
        if src == dst {
            continue;
        }
        *directed.entry((src, dst)).or_insert(0.0) += w;
    }

    // Symmetric weight per unordered pair, computed once so both stored
    // directions are bitwise identical.
    let mut undirected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(src, dst), &w) in &directed {
        let key = (src.min(dst), src.max(dst));
        if options.symmetrize {
            *undirected.entry(key).or_insert(0.0) += w / 2.0;
        } else {
            let reverse = directed.get(&(dst, src)).copied().unwrap_or(0.0);
            if reverse.to_bits() != w.to_bits() {
                return Err(Error::invalid(format!(
                    "asymmetric input without symmetrize: ({src}, {dst}) = {w} vs ({dst}, {src}) = {reverse}"
                )));
            }
            undirected.insert(key, w);
        }
    }
    undirected.retain(|_, w| *w >= MIN_EDGE_WEIGHT);
    if undirected.is_empty() {
        return Err(Error::invalid(
            "no edges remain after dropping self-loops and negligible weights",
        ));
    }

    // Union-find over the undirected support.
    let mut parent: Vec<usize> = (0..n_raw).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in undirected.keys() {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }

    let kept: Vec<usize> = if options.keep_largest_component {
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        let mut touched = vec![false; n_raw];
        for &(a, b) in undirected.keys() {
            touched[a] = true;
            touched[b] = true;
        }
        for v in 0..n_raw {
            if touched[v] {
                let r = find(&mut parent, v);
                *sizes.entry(r).or_insert(0) += 1;
            }
        }
        // Largest component; ties resolved by the smallest root id thanks to
        // BTreeMap iteration order.
        let (&best_root, _) = sizes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .unwrap();
        (0..n_raw)
            .filter(|&v| touched[v] && find(&mut parent, v) == best_root)
            .collect()
    } else {
        let mut touched = vec![false; n_raw];
        for &(a, b) in undirected.keys() {
            touched[a] = true;
            touched[b] = true;
        }
        (0..n_raw).filter(|&v| touched[v]).collect()
    };

    let node_map: BTreeMap<usize, usize> = kept
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    let mut triplets = Vec::with_capacity(undirected.len() * 2);
    for (&(a, b), &w) in &undirected {
        let (Some(&na), Some(&nb)) = (node_map.get(&a), node_map.get(&b)) else {
            continue;
        };
        triplets.push((na, nb, w));
        triplets.push((nb, na, w));
    }
    let graph = Graph::from_adjacency_triplets(node_map.len(), triplets)?;
    Ok(GraphBuild { graph, node_map })
}

impl Graph {
    /// Builds directly from already-symmetric triplets with dense ids.
    /// Costs default to 1/a_ij.
    pub fn from_adjacency_triplets(
        n: usize,
        triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Graph> {
        let adjacency = Csr::from_triplets(n, triplets);
        for (i, j, v) in adjacency.iter() {
            if i == j {
                return Err(Error::invalid(format!("self-loop stored at node {i}")));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("negative affinity at ({i}, {j})")));
            }
        }
        if !adjacency.is_symmetric_bitwise() {
            return Err(Error::invalid("adjacency is not symmetric"));
        }
        let costs = adjacency.map_values(|a| 1.0 / a);
        let degrees = adjacency.row_sums();
        Ok(Graph {
            adjacency,
            costs,
            degrees,
        })
    }

    /// Convenience constructor for unit-weight undirected edges (used widely
    /// in tests).
    pub fn from_unit_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let mut triplets = Vec::with_capacity(edges.len() * 2);
        for &(a, b) in edges {
            triplets.push((a, b, 1.0));
            triplets.push((b, a, 1.0));
        }
        Graph::from_adjacency_triplets(n, triplets).expect("valid unit edge list")
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Number of stored directed entries (twice the undirected edge count).
    pub fn nnz(&self) -> usize {
        self.adjacency.nnz()
    }

    pub fn adjacency(&self) -> &Csr {
        &self.adjacency
    }

    /// Cost matrix aligned with the adjacency support (c_ij = 1/a_ij by
    /// default; absent edges have no stored cost).
    pub fn costs(&self) -> &Csr {
        &self.costs
    }

    /// Node degrees a_i• .
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Total volume a•• (sum of all adjacency entries).
    pub fn volume(&self) -> f64 {
        self.degrees.iter().sum()
    }

    /// BFS reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in self.adjacency.row(v).0 {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    pub(crate) fn require_connected(&self, what: &str) -> Result<()> {
        if !self.is_connected() {
            return Err(Error::invalid(format!("{what} requires a connected graph")));
        }
        Ok(())
    }

    /// Laplacian view L = D − A.
    pub fn laplacian(&self) -> Result<LaplacianView<'_>> {
        self.check_degrees()?;
        Ok(LaplacianView { graph: self })
    }

    /// Row-stochastic transition view P = D⁻¹A.
    pub fn transition_matrix(&self) -> Result<TransitionView> {
        self.check_degrees()?;
        let inv_deg: Vec<f64> = self.degrees.iter().map(|&d| 1.0 / d).collect();
        Ok(TransitionView {
            p: self.adjacency.scale_rows(&inv_deg),
        })
    }

    fn check_degrees(&self) -> Result<()> {
        // Impossible on a connected graph with n >= 2; reported defensively.
        if let Some(i) = self.degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::invalid(format!(
                "node {i} has zero degree; its transition row cannot be normalized"
            )));
        }
        Ok(())
    }
}

/// L = D − A, applied matrix-free.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianView<'a> {
    graph: &'a Graph,
}

impl LaplacianView<'_> {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// y = Lx = Dx − Ax.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.graph.adjacency.mul_vec(x);
        for i in 0..y.len() {
            y[i] = self.graph.degrees[i] * x[i] - y[i];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = -self.graph.adjacency.to_dense();
        for i in 0..n {
            m[(i, i)] += self.graph.degrees[i];
        }
        m
    }
}

/// Row-stochastic random-walk transition matrix.
#[derive(Debug, Clone)]
pub struct TransitionView {
    p: Csr,
}

impl TransitionView {
    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn matrix(&self) -> &Csr {
        &self.p
    }

    /// y = Px (weighted neighborhood average).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.p.mul_vec(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.p.to_dense()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.p.row_sums()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetrize_splits_single_arc() {
        let built = build_graph(&[(1, 2, 1.0)], BuildOptions::default()).unwrap();
        let g = &built.graph;
        assert_eq!(g.n(), 2);
        assert_eq!(g.adjacency().get(0, 1), 0.5);
        assert_eq!(g.adjacency().get(1, 0), 0.5);
    }

    #[test]
    fn largest_component_kept_with_map() {
        // Two disjoint triangles... actually one triangle, and one isolated
        // edge: the 3-node component must survive and the map must cover it.
        let edges = [
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 0, 1.0),
            (10, 11, 1.0),
        ];
        let built = build_graph(&edges, BuildOptions::default()).unwrap();
        assert_eq!(built.graph.n(), 3);
        assert_eq!(built.node_map.len(), 3);
        assert_eq!(built.node_map[&0], 0);
        assert_eq!(built.node_map[&2], 2);
        assert!(!built.node_map.contains_key(&10));
    }

    #[test]
    fn self_loop_discarded() {
        let built = build_graph(
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 1, 5.0)],
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(built.graph.adjacency().get(1, 1), 0.0);
        assert_eq!(built.graph.adjacency().get(0, 1), 1.0);
    }

    #[test]
    fn empty_and_negative_rejected() {
        assert!(build_graph(&[], BuildOptions::default()).is_err());
        assert!(build_graph(&[(0, 1, -1.0)], BuildOptions::default()).is_err());
    }

    #[test]
    fn default_costs_are_reciprocal() {
        let built = build_graph(&[(0, 1, 1.0), (1, 0, 0.0)], BuildOptions::default()).unwrap();
        // (Aᵀ+A)/2 on w=1 one way only gives a_01 = 0.5 → c_01 = 2
        assert_eq!(built.graph.costs().get(0, 1), 2.0);

        let g = Graph::from_adjacency_triplets(2, vec![(0, 1, 4.0), (1, 0, 4.0)]).unwrap();
        assert_eq!(g.costs().get(0, 1), 0.25);
        let unit = Graph::from_unit_edges(2, &[(0, 1)]);
        assert_eq!(unit.costs().get(0, 1), 1.0);
    }

    #[test]
    fn k2_laplacian_and_transition() {
        let g = Graph::from_unit_edges(2, &[(0, 1)]);
        let l = g.laplacian().unwrap().to_dense();
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        let p = g.transition_matrix().unwrap().to_dense();
        assert_eq!(p[(0, 1)], 1.0);
        assert_eq!(p[(0, 0)], 0.0);
    }

    #[test]
    fn path_transition_row() {
        let g = Graph::from_unit_edges(3, &[(0, 1), (1, 2)]);
        let p = g.transition_matrix().unwrap();
        let row: Vec<f64> = (0..3).map(|j| p.matrix().get(1, j)).collect();
        assert_eq!(row, vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let g = Graph::from_unit_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]);
        let l = g.laplacian().unwrap();
        let ones = vec![1.0; 5];
        for v in l.mul_vec(&ones) {
            assert_relative_eq!(v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn connectivity_check() {
        let g = Graph::from_unit_edges(4, &[(0, 1), (2, 3)]);
        assert!(!g.is_connected());
        let g = Graph::from_unit_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        assert!(g.is_connected());
    }

    #[test]
    fn tiny_weights_treated_as_absent() {
        let built = build_graph(
            &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1e-15), (2, 1, 1e-15)],
            BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(built.graph.n(), 2);
    }
}
