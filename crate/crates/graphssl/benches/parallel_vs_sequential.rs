//! Sequential versus rayon execution of the crate's data-parallel loops.
//!
//! Both policies run from the same binary, so one `cargo bench` invocation
//! shows the gap directly. With `--no-default-features` the rayon policy
//! degrades to the sequential path and the two curves collapse.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graphssl::harness::{sbm_two_block, BenchConfig, CvParams, FeatureSetSpec, ParamGrids};
use graphssl::svm::{train_linear_svm_par, SvmParams};
use graphssl::{run_benchmark, write_dataset_dir, Parallelism};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("rayon", Parallelism::Rayon),
];

/// One-vs-one training: 12 classes give 66 independent pair subproblems.
fn svm_pair_training(c: &mut Criterion) {
    let classes = 12usize;
    let n = 50 * classes;
    let dim = 30usize;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let x = DMatrix::from_fn(n, dim, |i, j| {
        let center = if j == y[i] % dim { 2.5 } else { 0.0 };
        center + rng.gen::<f64>() - 0.5
    });
    let params = SvmParams::new(1.0, 7);

    let mut group = c.benchmark_group("svm_pair_training");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_linear_svm_par(&x, &y, &params, mode).unwrap())
        });
    }
    group.finish();
}

/// Full benchmark evaluation: 20 independent (feature set, method, fold)
/// cells over one synthetic dataset, the loop the `--workers` flag feeds.
fn benchmark_cells(c: &mut Criterion) {
    let data_dir = tempfile::tempdir().expect("dataset dir");
    let bundle = sbm_two_block(120, 0.12, 0.01, 8, 33).unwrap();
    write_dataset_dir(&bundle, data_dir.path()).unwrap();
    let config = BenchConfig {
        datasets: vec![data_dir.path().to_path_buf()],
        methods: vec!["SVM-X".into(), "CTK-A".into()],
        grids: ParamGrids {
            c: vec![0.01, 1.0],
            theta: vec![1e-3],
            p_fraction: vec![0.2],
            alpha: vec![0.8],
        },
        plan: CvParams {
            runs: 1,
            external_folds: 5,
            inner_folds: 5,
            labeling_rate: 0.2,
        },
        feature_sets: FeatureSetSpec { sizes: vec![4, 8] },
        seed: 5,
    };

    let mut group = c.benchmark_group("benchmark_cells");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let out = tempfile::tempdir().expect("out dir");
                let report = run_benchmark(&config, out.path(), false, mode).unwrap();
                assert!(report.is_complete());
                report.records.len()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, svm_pair_training, benchmark_cells);
criterion_main!(benches);
