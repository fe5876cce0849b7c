//! `graphssl` command line: benchmark driver plus small inspection tools
//! (autocorrelation report, embedding export, one-shot classification,
//! synthetic dataset generation).

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphssl::embed::{build_embedding, write_embedding_tsv, EmbeddingKind, EmbeddingSpec};
use graphssl::exec::{self, Parallelism};
use graphssl::harness::{emit_report, run_benchmark, BenchConfig};
use graphssl::spatial::class_autocorrelation_report;
use graphssl::{classify, load_dataset_dir, write_dataset_dir};
use graphssl::{ClassifyTask, MethodId, MethodParams, StructureCache};

#[derive(Parser)]
#[command(name = "graphssl", version, about = "Graph-based semi-supervised classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full benchmark described by a TOML config.
    Bench {
        /// Benchmark config (datasets, methods, grids, plan).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv, summary.json, ranks.csv,
        /// cd_diagram.svg and the progress journal.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Skip cells already recorded in the output's progress journal.
        #[arg(long)]
        resume: bool,
    },
    /// Print the class-indicator autocorrelation report for a dataset.
    Autocorr {
        /// Dataset directory.
        dir: PathBuf,
    },
    /// Extract a spectral embedding and write it as TSV (node id + scores).
    Embed {
        /// Embedding family.
        #[arg(long, value_enum)]
        kind: EmbedKindArg,
        /// Number of score vectors as a fraction of n, in (0, 1).
        #[arg(long = "p-frac")]
        p_frac: f64,
        /// Inverse temperature (bopmod only).
        #[arg(long)]
        theta: Option<f64>,
        /// Dataset directory.
        dir: PathBuf,
        /// Output TSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a dataset once with explicit parameters and report accuracy
    /// on the nodes left unlabeled.
    Classify {
        /// Method id, e.g. SVM-X, BoP-A, CTK-A, SVM-M-AX.
        #[arg(long)]
        method: String,
        /// SVM margin penalty C.
        #[arg(long)]
        c: Option<f64>,
        /// Bag-of-paths inverse temperature θ.
        #[arg(long)]
        theta: Option<f64>,
        /// Embedding size as a fraction of n.
        #[arg(long = "p-frac")]
        p_frac: Option<f64>,
        /// Commute-time kernel regularization α.
        #[arg(long)]
        alpha: Option<f64>,
        /// Fraction of each class revealed as labeled.
        #[arg(long, default_value_t = 0.2)]
        labeled_frac: f64,
        /// Seed for the labeled-set draw and any stochastic training step.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional TSV of per-node predictions (node id, class name).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset directory.
        dir: PathBuf,
    },
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        /// Nodes.
        #[arg(long, default_value_t = 400)]
        n: usize,
        /// Feature columns.
        #[arg(long, default_value_t = 20)]
        features: usize,
        /// Classes (blobs only; the block model always has two).
        #[arg(long, default_value_t = 2)]
        classes: usize,
        /// Within-block edge probability (sbm only).
        #[arg(long, default_value_t = 0.1)]
        p_in: f64,
        /// Cross-block edge probability (sbm only).
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        /// Class-center separation in feature space (blobs only).
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        /// Edge probability of the label-blind graph (blobs only).
        #[arg(long, default_value_t = 0.05)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedKindArg {
    Moran,
    Geary,
    Lpca,
    Bopmod,
}

impl From<EmbedKindArg> for EmbeddingKind {
    fn from(arg: EmbedKindArg) -> Self {
        match arg {
            EmbedKindArg::Moran => EmbeddingKind::Moran,
            EmbedKindArg::Geary => EmbeddingKind::Geary,
            EmbedKindArg::Lpca => EmbeddingKind::Lpca,
            EmbedKindArg::Bopmod => EmbeddingKind::BopModularity,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Two-block stochastic block model; classes follow the blocks.
    Sbm,
    /// Gaussian feature blobs over a label-blind random graph.
    Blobs,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Bench {
            config,
            out,
            workers,
            seed,
            resume,
        } => cmd_bench(&config, &out, workers, seed, resume),
        Command::Autocorr { dir } => cmd_autocorr(&dir),
        Command::Embed {
            kind,
            p_frac,
            theta,
            dir,
            out,
        } => cmd_embed(kind.into(), p_frac, theta, &dir, &out),
        Command::Classify {
            method,
            c,
            theta,
            p_frac,
            alpha,
            labeled_frac,
            seed,
            out,
            dir,
        } => cmd_classify(
            &method,
            MethodParams {
                c,
                theta,
                p_fraction: p_frac,
                alpha,
            },
            labeled_frac,
            seed,
            out.as_deref(),
            &dir,
        ),
        Command::Synth {
            kind,
            n,
            features,
            classes,
            p_in,
            p_out,
            separation,
            edge_prob,
            seed,
            out,
        } => cmd_synth(
            kind, n, features, classes, p_in, p_out, separation, edge_prob, seed, &out,
        ),
    }
}

fn cmd_bench(
    config_path: &std::path::Path,
    out: &std::path::Path,
    workers: usize,
    seed: Option<u64>,
    resume: bool,
) -> anyhow::Result<()> {
    let mut config = BenchConfig::from_toml_path(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    // Dataset paths in the config are relative to the config file.
    if let Some(base) = config_path.parent() {
        for d in &mut config.datasets {
            if d.is_relative() {
                *d = base.join(&d);
            }
        }
    }
    let report = exec::with_workers(workers, || {
        run_benchmark(&config, out, resume, Parallelism::Rayon)
    })?;
    let summary = emit_report(&report, out)?;
    println!(
        "{} of {} cells recorded ({} failed) over {} dataset(s)",
        summary.recorded_cells,
        summary.expected_cells,
        summary.failed_cells,
        summary.datasets.len()
    );
    if let Some(overall) = &summary.overall {
        if let (Some(stat), Some(p)) = (overall.friedman_statistic, overall.friedman_p_value) {
            println!("Friedman chi-square = {stat:.4}, p = {p:.6} over {} cases", overall.cases);
        }
        if let Some(cd) = overall.critical_difference {
            println!("Nemenyi critical difference = {cd:.4}");
        }
        let mut ranked: Vec<_> = overall.mean_ranks.iter().collect();
        ranked.sort_by(|a, b| a.1.total_cmp(b.1));
        for (method, rank) in ranked {
            println!("  {method:<12} mean rank {rank:.3}");
        }
    }
    println!("wrote results.csv, ranks.csv, summary.json, cd_diagram.svg to {}", out.display());
    if !summary.complete {
        bail!("benchmark incomplete: {} cell(s) failed", summary.failed_cells);
    }
    Ok(())
}

fn cmd_autocorr(dir: &std::path::Path) -> anyhow::Result<()> {
    let bundle = load_dataset_dir(dir)?;
    let report = class_autocorrelation_report(&bundle)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!();
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_embed(
    kind: EmbeddingKind,
    p_frac: f64,
    theta: Option<f64>,
    dir: &std::path::Path,
    out: &std::path::Path,
) -> anyhow::Result<()> {
    let bundle = load_dataset_dir(dir)?;
    let spec = match (kind, theta) {
        (EmbeddingKind::BopModularity, Some(t)) => EmbeddingSpec::with_theta(kind, p_frac, t),
        (EmbeddingKind::BopModularity, None) => bail!("--theta is required for --kind bopmod"),
        (_, Some(_)) => bail!("--theta only applies to --kind bopmod"),
        (_, None) => EmbeddingSpec::new(kind, p_frac),
    };
    let embedding = build_embedding(&bundle.graph, &spec)?;
    write_embedding_tsv(&embedding, out)?;
    println!(
        "wrote {} x {} {} embedding to {}",
        embedding.scores.nrows(),
        embedding.scores.ncols(),
        kind.as_str(),
        out.display()
    );
    Ok(())
}

fn cmd_classify(
    method: &str,
    params: MethodParams,
    labeled_frac: f64,
    seed: u64,
    out: Option<&std::path::Path>,
    dir: &std::path::Path,
) -> anyhow::Result<()> {
    let method = MethodId::parse(method)?;
    let bundle = load_dataset_dir(dir)?;
    if !(0.0 < labeled_frac && labeled_frac < 1.0) {
        bail!("--labeled-frac must lie strictly between 0 and 1");
    }
    let labeled = stratified_draw(&bundle.labels, bundle.n_classes(), labeled_frac, seed);
    let targets: Vec<usize> = (0..bundle.n())
        .filter(|i| !labeled.contains(i))
        .collect();
    if targets.is_empty() {
        bail!("--labeled-frac leaves no nodes to classify");
    }
    let cache = StructureCache::new();
    let task = ClassifyTask {
        labeled: &labeled,
        targets: &targets,
        seed,
    };
    let pred = classify(&bundle, method, &params, &task, &cache)?;
    let hits = targets
        .iter()
        .zip(&pred)
        .filter(|(&i, &p)| bundle.labels[i] == p)
        .count();
    println!(
        "{} on {:?}: {} labeled, {} classified, accuracy {:.4}",
        method,
        bundle.name,
        labeled.len(),
        targets.len(),
        hits as f64 / targets.len() as f64
    );
    if let Some(path) = out {
        let mut text = String::new();
        for (&node, &class) in targets.iter().zip(&pred) {
            text.push_str(&format!("{node}\t{}\n", bundle.class_names[class]));
        }
        std::fs::write(path, text)?;
        println!("wrote predictions to {}", path.display());
    }
    Ok(())
}

/// Reveals ~frac of each class as labeled (at least one node per class).
fn stratified_draw(labels: &[usize], n_classes: usize, frac: f64, seed: u64) -> Vec<usize> {
    let mut labeled = Vec::new();
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(exec::mix_seed(seed, class as u64));
        members.shuffle(&mut rng);
        let take = ((frac * members.len() as f64).round() as usize).clamp(1, members.len());
        labeled.extend_from_slice(&members[..take]);
    }
    labeled.sort_unstable();
    labeled
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    kind: SynthKind,
    n: usize,
    features: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    separation: f64,
    edge_prob: f64,
    seed: u64,
    out: &std::path::Path,
) -> anyhow::Result<()> {
    let bundle = match kind {
        SynthKind::Sbm => graphssl::harness::synth::sbm_two_block(n, p_in, p_out, features, seed)?,
        SynthKind::Blobs => graphssl::harness::synth::feature_blobs(
            n, classes, features, separation, edge_prob, seed,
        )?,
    };
    write_dataset_dir(&bundle, out)?;
    println!(
        "wrote {} nodes / {} features / {} classes to {}",
        bundle.n(),
        bundle.n_features(),
        bundle.n_classes(),
        out.display()
    );
    Ok(())
}
