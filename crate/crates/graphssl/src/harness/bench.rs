//! Benchmark orchestration: the full factorial of dataset × feature set ×
//! method × run × external fold, with nested tuning per cell, incremental
//! persistence, and resume.
//!
//! Every cell is a pure function of (config, seed), so cells can run
//! concurrently in any order; a journal (`progress.jsonl`) records each
//! finished cell as it lands and is rewritten canonically at the end,
//! which also makes reruns byte-identical.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::classify::{classify, ClassifyTask, MethodId, StructureCache};
use crate::embed::EmbeddingKind;
use crate::error::{Error, Result};
use crate::exec::{self, mix_seed, Parallelism};
use crate::graph::io::{load_dataset_dir, DatasetBundle};

use super::chi2::chi2_rank;
use super::cv::{make_cv_plan, CvParams, CvPlan};
use super::grid::{grid_search, ParamGrids};
use super::weaken::{build_feature_sets, FeatureSet, FeatureSetSpec};

/// Benchmark configuration, deserializable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Dataset directories (edges.tsv / features / labels.tsv each).
    pub datasets: Vec<PathBuf>,
    /// Method ids to run; defaults to all fourteen.
    pub methods: Vec<String>,
    pub grids: ParamGrids,
    pub plan: CvParams,
    pub feature_sets: FeatureSetSpec,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            datasets: Vec::new(),
            methods: MethodId::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            grids: ParamGrids::default(),
            plan: CvParams::default(),
            feature_sets: FeatureSetSpec::default(),
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::invalid(format!("bad benchmark config: {e}")))
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn method_ids(&self) -> Result<Vec<MethodId>> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured"));
        }
        let mut out = Vec::with_capacity(self.methods.len());
        for name in &self.methods {
            let id = MethodId::parse(name)?;
            if out.contains(&id) {
                return Err(Error::invalid(format!("method {id} listed twice")));
            }
            out.push(id);
        }
        Ok(out)
    }
}

/// One accuracy measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub feature_set: String,
    pub method: String,
    pub run: usize,
    pub fold: usize,
    pub n_labeled: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub params_json: String,
}

/// A cell that produced no accuracy, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFailure {
    pub dataset: String,
    pub feature_set: String,
    pub method: String,
    pub run: usize,
    pub fold: usize,
    pub reason: String,
}

/// Journal line: a finished cell, successful or not.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum JournalEntry {
    Ok(BenchRecord),
    Failed(BenchFailure),
}

/// The benchmark outcome: all records in canonical order plus whatever
/// failed.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<BenchFailure>,
    pub datasets: Vec<String>,
    pub feature_sets: Vec<String>,
    pub methods: Vec<MethodId>,
    /// Cells the factorial called for; records + distinct failures should
    /// reach this when nothing is missing.
    pub expected_cells: usize,
}

impl EvalReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.records.len() == self.expected_cells
    }
}

type CellKey = (String, String, String, usize, usize);

fn record_key(r: &BenchRecord) -> CellKey {
    (
        r.dataset.clone(),
        r.feature_set.clone(),
        r.method.clone(),
        r.run,
        r.fold,
    )
}

/// Feature-set labels sort by their numeric size ("5F" < "100F").
pub(crate) fn feature_set_size(label: &str) -> usize {
    label
        .strip_suffix('F')
        .and_then(|s| s.parse().ok())
        .unwrap_or(usize::MAX)
}

fn method_position(name: &str) -> usize {
    MethodId::ALL
        .iter()
        .position(|m| m.as_str() == name)
        .unwrap_or(usize::MAX)
}

fn canonical_record_order(a: &BenchRecord, b: &BenchRecord) -> std::cmp::Ordering {
    a.dataset
        .cmp(&b.dataset)
        .then(feature_set_size(&a.feature_set).cmp(&feature_set_size(&b.feature_set)))
        .then(method_position(&a.method).cmp(&method_position(&b.method)))
        .then(a.run.cmp(&b.run))
        .then(a.fold.cmp(&b.fold))
}

/// Runs the complete benchmark described by `config`, journaling into
/// `out_dir/progress.jsonl`. With `resume`, cells already recorded as ok
/// in the journal are skipped (previous failures are retried).
pub fn run_benchmark(
    config: &BenchConfig,
    out_dir: &Path,
    resume: bool,
    mode: Parallelism,
) -> Result<EvalReport> {
    let methods = config.method_ids()?;
    config.grids.validate()?;
    config.feature_sets.validate()?;
    if config.datasets.is_empty() {
        return Err(Error::invalid("no datasets configured"));
    }
    std::fs::create_dir_all(out_dir)?;
    let journal_path = out_dir.join("progress.jsonl");

    let mut completed: BTreeMap<CellKey, BenchRecord> = BTreeMap::new();
    if resume && journal_path.exists() {
        for entry in read_journal(&journal_path)? {
            if let JournalEntry::Ok(rec) = entry {
                completed.insert(record_key(&rec), rec);
            }
        }
        log::info!("resuming: {} cells already done", completed.len());
    }
    let journal = Mutex::new(BufWriter::new(if resume {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)?
    } else {
        File::create(&journal_path)?
    }));

    let mut records: Vec<BenchRecord> = completed.values().cloned().collect();
    let mut failures: Vec<BenchFailure> = Vec::new();
    let mut dataset_names = Vec::new();
    let mut set_labels: BTreeMap<usize, String> = BTreeMap::new();
    let mut expected_cells = 0usize;

    for (d_idx, dir) in config.datasets.iter().enumerate() {
        let bundle = load_dataset_dir(dir)?;
        if dataset_names.contains(&bundle.name) {
            return Err(Error::invalid(format!(
                "duplicate dataset name {:?}; directories must be distinct",
                bundle.name
            )));
        }
        dataset_names.push(bundle.name.clone());

        let ranking = chi2_rank(&bundle.features, &bundle.labels)?;
        let sets = build_feature_sets(&bundle, &ranking, &config.feature_sets)?;
        for s in &sets {
            set_labels.insert(s.size, s.label.clone());
        }
        let plan_seed = mix_seed(config.seed, d_idx as u64);
        let plan = make_cv_plan(&bundle.labels, &config.plan, plan_seed)?;

        let cache = StructureCache::new();
        precompute_structures(&bundle, &methods, &config.grids, &cache, mode);

        // Every cell of this dataset's factorial that isn't already done.
        let mut cells = Vec::new();
        for (s_idx, set) in sets.iter().enumerate() {
            for &method in &methods {
                for run in 0..plan.runs.len() {
                    for fold in 0..plan.runs[run].folds.len() {
                        expected_cells += 1;
                        let key = (
                            bundle.name.clone(),
                            set.label.clone(),
                            method.as_str().to_string(),
                            run,
                            fold,
                        );
                        if !completed.contains_key(&key) {
                            cells.push(Cell {
                                s_idx,
                                method,
                                run,
                                fold,
                            });
                        }
                    }
                }
            }
        }

        let outcomes = exec::map_slice(mode, &cells, |cell| {
            let entry = run_cell(&bundle, &sets, &plan, config, cell, plan_seed, &cache);
            let mut out = journal.lock().unwrap();
            if let Ok(line) = serde_json::to_string(&entry) {
                let _ = writeln!(out, "{line}");
                let _ = out.flush();
            }
            entry
        });
        for entry in outcomes {
            match entry {
                JournalEntry::Ok(rec) => records.push(rec),
                JournalEntry::Failed(f) => failures.push(f),
            }
        }
    }

    records.sort_by(canonical_record_order);
    records.dedup_by(|a, b| record_key(a) == record_key(b));
    failures.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(feature_set_size(&a.feature_set).cmp(&feature_set_size(&b.feature_set)))
            .then(method_position(&a.method).cmp(&method_position(&b.method)))
            .then(a.run.cmp(&b.run))
            .then(a.fold.cmp(&b.fold))
    });
    drop(journal);
    rewrite_journal(&journal_path, &records, &failures)?;

    if !failures.is_empty() {
        log::warn!("{} cells failed; report is incomplete", failures.len());
    }
    Ok(EvalReport {
        records,
        failures,
        datasets: dataset_names,
        feature_sets: set_labels.into_values().collect(),
        methods,
        expected_cells,
    })
}

struct Cell {
    s_idx: usize,
    method: MethodId,
    run: usize,
    fold: usize,
}

fn run_cell(
    bundle: &DatasetBundle,
    sets: &[FeatureSet],
    plan: &CvPlan,
    config: &BenchConfig,
    cell: &Cell,
    plan_seed: u64,
    cache: &StructureCache,
) -> JournalEntry {
    let set = &sets[cell.s_idx];
    let split = &plan.runs[cell.run].folds[cell.fold];
    let cell_seed = mix_seed(
        mix_seed(plan_seed, (set.size as u64) << 20 | method_position(cell.method.as_str()) as u64),
        (cell.run as u64) << 8 | cell.fold as u64,
    );
    let fail = |reason: String| {
        JournalEntry::Failed(BenchFailure {
            dataset: bundle.name.clone(),
            feature_set: set.label.clone(),
            method: cell.method.as_str().to_string(),
            run: cell.run,
            fold: cell.fold,
            reason,
        })
    };
    let outcome = match grid_search(
        &set.bundle,
        cell.method,
        &config.grids,
        split,
        cell_seed,
        cache,
    ) {
        Ok(o) => o,
        Err(e) => return fail(format!("tuning failed: {e}")),
    };
    let task = ClassifyTask {
        labeled: &split.labeled,
        targets: &split.test,
        seed: cell_seed,
    };
    let pred = match classify(&set.bundle, cell.method, &outcome.params, &task, cache) {
        Ok(p) => p,
        Err(e) => return fail(format!("classification failed: {e}")),
    };
    let hits = split
        .test
        .iter()
        .zip(&pred)
        .filter(|(&i, &p)| bundle.labels[i] == p)
        .count();
    JournalEntry::Ok(BenchRecord {
        dataset: bundle.name.clone(),
        feature_set: set.label.clone(),
        method: cell.method.as_str().to_string(),
        run: cell.run,
        fold: cell.fold,
        n_labeled: split.labeled.len(),
        n_test: split.test.len(),
        accuracy: hits as f64 / split.test.len() as f64,
        params_json: outcome.params.to_json(),
    })
}

/// Builds every label-independent structure any configured method can ask
/// for, so concurrent cells only ever hit the cache. Failures are left for
/// the owning cells to report.
fn precompute_structures(
    bundle: &DatasetBundle,
    methods: &[MethodId],
    grids: &ParamGrids,
    cache: &StructureCache,
    mode: Parallelism,
) {
    #[derive(Clone)]
    enum Want {
        Embedding(EmbeddingKind, f64, Option<f64>),
        Bop(f64),
        Rctk(f64),
    }
    let mut wants: Vec<Want> = Vec::new();
    for &method in methods {
        if let Some(kind) = method.embedding_kind() {
            for &p in &grids.p_fraction {
                if kind == EmbeddingKind::BopModularity {
                    for &theta in &grids.theta {
                        wants.push(Want::Embedding(kind, p, Some(theta)));
                    }
                } else {
                    wants.push(Want::Embedding(kind, p, None));
                }
            }
        }
        match method {
            MethodId::BopA => {
                for &theta in &grids.theta {
                    wants.push(Want::Bop(theta));
                }
            }
            MethodId::SvmDkAx => wants.push(Want::Rctk(crate::classify::DEFAULT_DK_ALPHA)),
            _ => {}
        }
    }
    exec::map_slice(mode, &wants, |w| match w {
        Want::Embedding(kind, p, theta) => {
            let _ = cache.embedding(bundle, *kind, *p, *theta);
        }
        Want::Bop(theta) => {
            let _ = cache.bop_context(bundle, *theta);
        }
        Want::Rctk(alpha) => {
            let _ = cache.rctk_kernel(bundle, *alpha);
        }
    });
}

fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(entry) => out.push(entry),
            Err(e) => log::warn!("skipping corrupt journal line: {e}"),
        }
    }
    Ok(out)
}

/// Replaces the append-order journal with the canonical ordering so a
/// finished run always leaves the same bytes behind.
fn rewrite_journal(
    path: &Path,
    records: &[BenchRecord],
    failures: &[BenchFailure],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        let line = serde_json::to_string(&JournalEntry::Ok(rec.clone()))
            .expect("record serializes");
        writeln!(out, "{line}")?;
    }
    for f in failures {
        let line = serde_json::to_string(&JournalEntry::Failed(f.clone()))
            .expect("failure serializes");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::io::write_dataset_dir;
    use crate::harness::synth::{feature_blobs, sbm_two_block};

    fn small_config(dir: &Path, methods: &[&str]) -> BenchConfig {
        BenchConfig {
            datasets: vec![dir.to_path_buf()],
            methods: methods.iter().map(|s| s.to_string()).collect(),
            grids: ParamGrids {
                c: vec![1.0],
                theta: vec![0.1],
                p_fraction: vec![0.1],
                alpha: vec![0.6, 0.8],
            },
            plan: CvParams {
                runs: 1,
                ..Default::default()
            },
            feature_sets: FeatureSetSpec {
                sizes: vec![2, 4],
            },
            seed: 11,
        }
    }

    fn write_blobs(root: &Path) -> PathBuf {
        let bundle = feature_blobs(60, 2, 6, 4.0, 0.08, 21).unwrap();
        let dir = root.join("blobs");
        write_dataset_dir(&bundle, &dir).unwrap();
        dir
    }

    #[test]
    fn factorial_counts_and_completeness() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blobs(tmp.path());
        let out = tmp.path().join("out");
        let config = small_config(&data, &["SVM-X", "CTK-A"]);
        let report =
            run_benchmark(&config, &out, false, Parallelism::Sequential).unwrap();
        // 2 feature sets × 2 methods × 1 run × 5 folds.
        assert_eq!(report.expected_cells, 20);
        assert_eq!(report.records.len(), 20);
        assert!(report.is_complete());
        assert!(out.join("progress.jsonl").exists());
        for r in &report.records {
            assert_eq!(r.n_labeled, 12);
            assert_eq!(r.n_test, 48);
            assert!((0.0..=1.0).contains(&r.accuracy));
        }
    }

    #[test]
    fn graph_only_methods_ignore_feature_sets() {
        let tmp = tempfile::tempdir().unwrap();
        let bundle = sbm_two_block(60, 0.2, 0.02, 8, 31).unwrap();
        let data = tmp.path().join("sbm");
        write_dataset_dir(&bundle, &data).unwrap();
        let out = tmp.path().join("out");
        let config = small_config(&data, &["CTK-A", "BoP-A"]);
        let report =
            run_benchmark(&config, &out, false, Parallelism::Sequential).unwrap();
        // Same (method, run, fold) must score identically on every
        // feature set, since these methods never read the features.
        for r in &report.records {
            let twin = report
                .records
                .iter()
                .find(|o| {
                    o.method == r.method
                        && o.run == r.run
                        && o.fold == r.fold
                        && o.feature_set != r.feature_set
                })
                .expect("second feature set present");
            assert_eq!(r.accuracy, twin.accuracy);
            assert_eq!(r.params_json, twin.params_json);
        }
    }

    #[test]
    fn rerun_is_byte_identical_and_resume_skips() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blobs(tmp.path());

        let out1 = tmp.path().join("a");
        let out2 = tmp.path().join("b");
        let config = small_config(&data, &["SVM-X", "CTK-A"]);
        run_benchmark(&config, &out1, false, Parallelism::Sequential).unwrap();
        run_benchmark(&config, &out2, false, Parallelism::Sequential).unwrap();
        let j1 = std::fs::read(out1.join("progress.jsonl")).unwrap();
        let j2 = std::fs::read(out2.join("progress.jsonl")).unwrap();
        assert_eq!(j1, j2);

        // Truncate the journal to half the cells and resume.
        let text = String::from_utf8(j1).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let kept = lines.len() / 2;
        std::fs::write(
            out1.join("progress.jsonl"),
            lines[..kept].join("\n") + "\n",
        )
        .unwrap();
        let report = run_benchmark(&config, &out1, true, Parallelism::Sequential).unwrap();
        assert!(report.is_complete());
        let j1_again = std::fs::read(out1.join("progress.jsonl")).unwrap();
        assert_eq!(j1_again, j2);
    }

    #[test]
    fn parallel_matches_sequential() {
        let tmp = tempfile::tempdir().unwrap();
        let data = write_blobs(tmp.path());
        let config = small_config(&data, &["SVM-X", "SVM-M-A"]);
        let out_s = tmp.path().join("seq");
        let out_p = tmp.path().join("par");
        let a = run_benchmark(&config, &out_s, false, Parallelism::Sequential).unwrap();
        let b = run_benchmark(&config, &out_p, false, Parallelism::Rayon).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let mut config = BenchConfig::default();
        assert!(run_benchmark(&config, &out, false, Parallelism::Sequential).is_err());
        config.datasets = vec![tmp.path().join("missing")];
        config.methods = vec!["SVM-Q".into()];
        assert!(run_benchmark(&config, &out, false, Parallelism::Sequential).is_err());
        let parsed = BenchConfig::from_toml_str("seed = 3\ndatasets = [\"x\"]\n").unwrap();
        assert_eq!(parsed.seed, 3);
        assert_eq!(parsed.methods.len(), 14);
        assert!(BenchConfig::from_toml_str("nonsense_field = 1").is_err());
    }
}
