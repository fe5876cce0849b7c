//! Graph-based semi-supervised classification toolkit.
//!
//! Implements a family of within-network classifiers that exploit both a
//! graph structure and node features — spatial-autocorrelation embeddings
//! (Moran, Geary, local PCA, bag-of-paths modularity), bag-of-paths group
//! betweenness, regularized commute-time kernels, spatial autoregressive
//! models, and SVM combinations thereof — together with the nested
//! cross-validation benchmark harness and Friedman/Nemenyi comparison used
//! to evaluate them.

pub mod bop;
pub mod classify;
pub mod eigen;
pub mod embed;
pub mod error;
pub mod exec;
pub mod features;
pub mod graph;
pub mod harness;
pub mod kernels;
pub mod sparse;
pub mod svm;
pub mod spatial;

pub use classify::{classify, ClassifyTask, MethodId, MethodParams, StructureCache};
pub use error::{Error, Result};
pub use exec::Parallelism;
pub use graph::io::{load_dataset_dir, write_dataset_dir, DatasetBundle};
pub use graph::{build_graph, BuildOptions, Graph, GraphBuild};
pub use harness::{run_benchmark, BenchConfig, EvalReport};
