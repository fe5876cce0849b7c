//! The fourteen classifier configurations and their dispatch.
//!
//! Methods split along two axes: what they consume (graph only, features
//! only, or both) and the mechanism (SVM on composed features, similarity
//! scores, autoregression, autocovariate iteration). This module wires the
//! shared building blocks into each named configuration and provides the
//! structure cache that lets a benchmark reuse label-independent artifacts
//! (embeddings, fundamental matrices, kernels) across folds.

pub mod autosvm;
pub mod sar;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::bop::{bop_fundamental, bop_group_betweenness_classify, BopContext};
use crate::embed::{build_embedding, Embedding, EmbeddingKind, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::features::compose_features;
use crate::graph::io::DatasetBundle;
use crate::kernels::{linear_feature_kernel, rctk, rctk_sum_of_similarities, KernelMatrix};
use crate::svm::{train_linear_svm, LinearSvmModel, SvmParams};

/// Default kernel regularization for the double-kernel method, the modal
/// tuned value of the sum-of-similarities classifier.
pub const DEFAULT_DK_ALPHA: f64 = 0.8;

/// The 14 benchmark configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    SvmX,
    BopA,
    CtkA,
    SvmMoranA,
    SvmGearyA,
    SvmLpcaA,
    SvmBopmA,
    SarAx,
    SvmMoranAx,
    SvmGearyAx,
    SvmLpcaAx,
    SvmBopmAx,
    AsvmAx,
    SvmDkAx,
}

impl MethodId {
    pub const ALL: [MethodId; 14] = [
        MethodId::SvmX,
        MethodId::BopA,
        MethodId::CtkA,
        MethodId::SvmMoranA,
        MethodId::SvmGearyA,
        MethodId::SvmLpcaA,
        MethodId::SvmBopmA,
        MethodId::SarAx,
        MethodId::SvmMoranAx,
        MethodId::SvmGearyAx,
        MethodId::SvmLpcaAx,
        MethodId::SvmBopmAx,
        MethodId::AsvmAx,
        MethodId::SvmDkAx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::SvmX => "SVM-X",
            MethodId::BopA => "BoP-A",
            MethodId::CtkA => "CTK-A",
            MethodId::SvmMoranA => "SVM-M-A",
            MethodId::SvmGearyA => "SVM-G-A",
            MethodId::SvmLpcaA => "SVM-L-A",
            MethodId::SvmBopmA => "SVM-BoPM-A",
            MethodId::SarAx => "SAR-AX",
            MethodId::SvmMoranAx => "SVM-M-AX",
            MethodId::SvmGearyAx => "SVM-G-AX",
            MethodId::SvmLpcaAx => "SVM-L-AX",
            MethodId::SvmBopmAx => "SVM-BoPM-AX",
            MethodId::AsvmAx => "ASVM-AX",
            MethodId::SvmDkAx => "SVM-DK-AX",
        }
    }

    pub fn parse(s: &str) -> Result<MethodId> {
        MethodId::ALL
            .iter()
            .copied()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method id {s:?}")))
    }

    /// Does the method read the graph structure?
    pub fn uses_graph(self) -> bool {
        !matches!(self, MethodId::SvmX)
    }

    /// Does the method read the node features?
    pub fn uses_features(self) -> bool {
        matches!(
            self,
            MethodId::SvmX
                | MethodId::SarAx
                | MethodId::SvmMoranAx
                | MethodId::SvmGearyAx
                | MethodId::SvmLpcaAx
                | MethodId::SvmBopmAx
                | MethodId::AsvmAx
                | MethodId::SvmDkAx
        )
    }

    /// The structural embedding consumed, if any.
    pub fn embedding_kind(self) -> Option<EmbeddingKind> {
        match self {
            MethodId::SvmMoranA | MethodId::SvmMoranAx => Some(EmbeddingKind::Moran),
            MethodId::SvmGearyA | MethodId::SvmGearyAx => Some(EmbeddingKind::Geary),
            MethodId::SvmLpcaA | MethodId::SvmLpcaAx => Some(EmbeddingKind::Lpca),
            MethodId::SvmBopmA | MethodId::SvmBopmAx => Some(EmbeddingKind::BopModularity),
            _ => None,
        }
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hyperparameters for one configuration; each method reads only the fields
/// it declares (see the tuning grids).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MethodParams {
    /// SVM margin penalty C.
    pub c: Option<f64>,
    /// Bag-of-paths inverse temperature θ.
    pub theta: Option<f64>,
    /// Embedding size as a fraction of n.
    pub p_fraction: Option<f64>,
    /// Commute-time kernel regularization α.
    pub alpha: Option<f64>,
}

impl MethodParams {
    /// Serializes the set fields with sorted keys (stable JSON).
    pub fn to_json(&self) -> String {
        let mut map: BTreeMap<&str, f64> = BTreeMap::new();
        if let Some(v) = self.c {
            map.insert("C", v);
        }
        if let Some(v) = self.theta {
            map.insert("theta", v);
        }
        if let Some(v) = self.p_fraction {
            map.insert("p_fraction", v);
        }
        if let Some(v) = self.alpha {
            map.insert("alpha", v);
        }
        serde_json::to_string(&map).expect("flat map serializes")
    }

    fn need_c(&self) -> Result<f64> {
        self.c
            .ok_or_else(|| Error::invalid("method needs a margin penalty C"))
    }

    fn need_theta(&self) -> Result<f64> {
        self.theta
            .ok_or_else(|| Error::invalid("method needs an inverse temperature theta"))
    }

    fn need_p(&self) -> Result<f64> {
        self.p_fraction
            .ok_or_else(|| Error::invalid("method needs an embedding-size fraction"))
    }

    fn need_alpha(&self) -> Result<f64> {
        self.alpha
            .ok_or_else(|| Error::invalid("method needs a kernel regularization alpha"))
    }
}

/// A labeled/target split of the nodes plus the seed that fixes every
/// stochastic choice downstream.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyTask<'a> {
    pub labeled: &'a [usize],
    pub targets: &'a [usize],
    pub seed: u64,
}

impl ClassifyTask<'_> {
    fn validate(&self, n: usize) -> Result<()> {
        if self.labeled.is_empty() {
            return Err(Error::invalid("no labeled nodes"));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("no target nodes"));
        }
        let mut seen = vec![false; n];
        for &i in self.labeled {
            if i >= n {
                return Err(Error::invalid(format!("labeled node {i} out of range")));
            }
            seen[i] = true;
        }
        for &i in self.targets {
            if i >= n {
                return Err(Error::invalid(format!("target node {i} out of range")));
            }
            if seen[i] {
                return Err(Error::invalid(format!("node {i} is both labeled and target")));
            }
        }
        Ok(())
    }
}

/// Cache of label-independent structural artifacts for one graph. Shared
/// across folds and methods; every entry is a pure function of its key, so
/// concurrent fills are harmless.
#[derive(Default)]
pub struct StructureCache {
    embeddings: Mutex<BTreeMap<(EmbeddingKind, u64, u64), Arc<Embedding>>>,
    bop: Mutex<BTreeMap<u64, Arc<BopContext>>>,
    rctk: Mutex<BTreeMap<u64, Arc<KernelMatrix>>>,
}

impl StructureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn embedding(
        &self,
        bundle: &DatasetBundle,
        kind: EmbeddingKind,
        p_fraction: f64,
        theta: Option<f64>,
    ) -> Result<Arc<Embedding>> {
        let key = (
            kind,
            p_fraction.to_bits(),
            theta.unwrap_or(f64::NAN).to_bits(),
        );
        if let Some(hit) = self.embeddings.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let spec = EmbeddingSpec {
            kind,
            p_fraction,
            theta,
        };
        let built = Arc::new(build_embedding(&bundle.graph, &spec)?);
        let mut map = self.embeddings.lock().unwrap();
        Ok(map.entry(key).or_insert(built).clone())
    }

    pub fn bop_context(&self, bundle: &DatasetBundle, theta: f64) -> Result<Arc<BopContext>> {
        let key = theta.to_bits();
        if let Some(hit) = self.bop.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(bop_fundamental(&bundle.graph, theta)?);
        let mut map = self.bop.lock().unwrap();
        Ok(map.entry(key).or_insert(built).clone())
    }

    pub fn rctk_kernel(&self, bundle: &DatasetBundle, alpha: f64) -> Result<Arc<KernelMatrix>> {
        let key = alpha.to_bits();
        if let Some(hit) = self.rctk.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(rctk(&bundle.graph, alpha)?);
        let mut map = self.rctk.lock().unwrap();
        Ok(map.entry(key).or_insert(built).clone())
    }
}

fn labeled_by_class(bundle: &DatasetBundle, labeled: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in labeled {
        map.entry(bundle.labels[i]).or_default().push(i);
    }
    map
}

fn svm_on_composed(
    bundle: &DatasetBundle,
    parts: &[DMatrix<f64>],
    task: &ClassifyTask<'_>,
    c: f64,
) -> Result<Vec<usize>> {
    let composed = compose_features(parts, task.labeled)?;
    let model = train_on_rows(&composed, bundle, task.labeled, c, task.seed)?;
    predict_rows_subset(&model, &composed, task.targets)
}

pub(crate) fn train_on_rows(
    composed: &DMatrix<f64>,
    bundle: &DatasetBundle,
    rows: &[usize],
    c: f64,
    seed: u64,
) -> Result<LinearSvmModel> {
    let x = composed.select_rows(rows.iter());
    let y: Vec<usize> = rows.iter().map(|&i| bundle.labels[i]).collect();
    train_linear_svm(&x, &y, &SvmParams::new(c, seed))
}

pub(crate) fn predict_rows_subset(
    model: &LinearSvmModel,
    composed: &DMatrix<f64>,
    rows: &[usize],
) -> Result<Vec<usize>> {
    let x = composed.select_rows(rows.iter());
    model.predict_rows(&x)
}

/// Runs one configuration on one labeled/target split, returning the
/// predicted class per target.
pub fn classify(
    bundle: &DatasetBundle,
    method: MethodId,
    params: &MethodParams,
    task: &ClassifyTask<'_>,
    cache: &StructureCache,
) -> Result<Vec<usize>> {
    task.validate(bundle.n())?;
    match method {
        MethodId::SvmX => {
            svm_on_composed(bundle, &[bundle.features.clone()], task, params.need_c()?)
        }
        MethodId::BopA => {
            let ctx = cache.bop_context(bundle, params.need_theta()?)?;
            let labeled = labeled_by_class(bundle, task.labeled);
            let (pred, _) = bop_group_betweenness_classify(&ctx, &labeled, task.targets)?;
            Ok(pred)
        }
        MethodId::CtkA => {
            let labeled = labeled_by_class(bundle, task.labeled);
            let (pred, _) = rctk_sum_of_similarities(
                &bundle.graph,
                params.need_alpha()?,
                &labeled,
                task.targets,
            )?;
            Ok(pred)
        }
        MethodId::SvmMoranA | MethodId::SvmGearyA | MethodId::SvmLpcaA | MethodId::SvmBopmA => {
            let kind = method.embedding_kind().unwrap();
            let theta = if kind == EmbeddingKind::BopModularity {
                Some(params.need_theta()?)
            } else {
                None
            };
            let emb = cache.embedding(bundle, kind, params.need_p()?, theta)?;
            svm_on_composed(bundle, &[emb.scores.clone()], task, params.need_c()?)
        }
        MethodId::SvmMoranAx | MethodId::SvmGearyAx | MethodId::SvmLpcaAx | MethodId::SvmBopmAx => {
            let kind = method.embedding_kind().unwrap();
            let theta = if kind == EmbeddingKind::BopModularity {
                Some(params.need_theta()?)
            } else {
                None
            };
            let emb = cache.embedding(bundle, kind, params.need_p()?, theta)?;
            svm_on_composed(
                bundle,
                &[bundle.features.clone(), emb.scores.clone()],
                task,
                params.need_c()?,
            )
        }
        MethodId::SarAx => {
            let model = sar::sar_fit(bundle, task.labeled)?;
            let all = sar::sar_classify(&model, bundle)?;
            Ok(task.targets.iter().map(|&i| all[i]).collect())
        }
        MethodId::AsvmAx => {
            let (pred, _) = autosvm::autosvm_classify(
                bundle,
                task,
                params.need_c()?,
                &autosvm::AutoSvmOptions::default(),
            )?;
            Ok(pred)
        }
        MethodId::SvmDkAx => {
            let alpha = params.alpha.unwrap_or(DEFAULT_DK_ALPHA);
            let ka = cache.rctk_kernel(bundle, alpha)?;
            let kx = linear_feature_kernel(&bundle.features);
            svm_on_composed(
                bundle,
                &[ka.k.clone(), kx.k.clone()],
                task,
                params.need_c()?,
            )
        }
    }
}
