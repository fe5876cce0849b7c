//! Seeded synthetic datasets for the self-contained test suites: one where
//! the graph carries the class signal and the features are noise, and one
//! where the features carry it and the graph is near-random.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::graph::io::DatasetBundle;
use crate::graph::Graph;

/// Two-block stochastic block model whose communities are the classes,
/// with iid standard-normal features carrying no class signal. Nodes
/// 0..n/2 form class 0. The graph is forced connected by chaining any
/// stray components to the main one.
pub fn sbm_two_block(
    n: usize,
    p_in: f64,
    p_out: f64,
    n_features: usize,
    seed: u64,
) -> Result<DatasetBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let features = DMatrix::from_fn(n, n_features, |_, _| normal.sample(&mut rng));
    assemble("sbm", n, edges, features, labels)
}

/// Gaussian feature blobs per class with an Erdős–Rényi graph drawn
/// independently of the labels. Class c's blob center sits at
/// `separation` along feature axis c (mod the feature count); classes are
/// assigned round-robin. The graph is forced connected the same way.
pub fn feature_blobs(
    n: usize,
    classes: usize,
    n_features: usize,
    separation: f64,
    edge_prob: f64,
    seed: u64,
) -> Result<DatasetBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let features = DMatrix::from_fn(n, n_features, |i, j| {
        let center = if j == labels[i] % n_features {
            separation
        } else {
            0.0
        };
        center + normal.sample(&mut rng)
    });
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    assemble("blobs", n, edges, features, labels)
}

fn assemble(
    name: &str,
    n: usize,
    mut edges: Vec<(usize, usize)>,
    features: DMatrix<f64>,
    labels: Vec<usize>,
) -> Result<DatasetBundle> {
    connect_components(n, &mut edges);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(DatasetBundle {
        name: name.to_string(),
        graph: Graph::from_unit_edges(n, &edges),
        features,
        labels,
        class_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
    })
}

/// Adds one edge per extra component, chaining component representatives
/// so the generated graph is always connected (and the bundle keeps all n
/// nodes regardless of the random draw).
fn connect_components(n: usize, edges: &mut Vec<(usize, usize)>) {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in edges.iter() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut reps: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == i).collect();
    reps.sort_unstable();
    for pair in reps.windows(2) {
        edges.push((pair[0], pair[1]));
    }
}
