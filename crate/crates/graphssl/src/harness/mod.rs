//! Evaluation harness: synthetic data, feature ranking and weakening,
//! cross-validation planning, grid tuning, the benchmark driver, and rank
//! statistics with reporting.

pub mod bench;
pub mod chi2;
pub mod cv;
pub mod grid;
pub mod report;
pub mod stats;
pub mod synth;
pub mod weaken;

pub use bench::{run_benchmark, BenchConfig, BenchFailure, BenchRecord, EvalReport};
pub use chi2::{chi2_rank, Chi2Ranking};
pub use cv::{make_cv_plan, CvParams, CvPlan, FoldSplit};
pub use grid::{grid_search, method_grid, GridOutcome, ParamGrids};
pub use report::{accuracy_cases, emit_report, ReportSummary};
pub use stats::{friedman_test, nemenyi_cd, FriedmanResult};
pub use synth::{feature_blobs, sbm_two_block};
pub use weaken::{build_feature_sets, FeatureSet, FeatureSetSpec};
