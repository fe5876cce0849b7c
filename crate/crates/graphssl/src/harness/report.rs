//! Turns benchmark records into the deliverables: `results.csv`,
//! `ranks.csv`, `summary.json`, and a critical-difference diagram.
//!
//! Rank analysis treats each (dataset, feature set, run) as one case,
//! scoring a method by its accuracy averaged over that run's external
//! folds. Cases missing any method are dropped (and counted), so every
//! comparison stays paired.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::bench::{feature_set_size, BenchFailure, BenchRecord, EvalReport};
use super::grid::mode_value;
use super::stats::{friedman_test, nemenyi_cd, rank_descending, FriedmanResult};

/// Methods × cases accuracy table for rank statistics.
#[derive(Debug, Clone)]
pub struct CaseTable {
    pub methods: Vec<String>,
    /// (dataset, feature_set, run) labels, one per column.
    pub cases: Vec<(String, String, usize)>,
    /// Row per method, column per case.
    pub matrix: DMatrix<f64>,
    /// Cases dropped because some method was missing folds there.
    pub dropped: usize,
}

/// Builds the paired case table from raw records, keeping only cases where
/// every method covers the same folds. Pass `feature_set: Some(label)` to
/// restrict to one feature set.
pub fn accuracy_cases(report: &EvalReport, feature_set: Option<&str>) -> Result<CaseTable> {
    let methods: Vec<String> = report
        .methods
        .iter()
        .map(|m| m.as_str().to_string())
        .collect();
    if methods.is_empty() {
        return Err(Error::invalid("no methods in report"));
    }
    // (dataset, feature_set, run) -> method -> fold -> accuracy.
    type PerMethod = BTreeMap<String, BTreeMap<usize, f64>>;
    let mut by_case: BTreeMap<(String, String, usize), PerMethod> = BTreeMap::new();
    for r in &report.records {
        if let Some(fs) = feature_set {
            if r.feature_set != fs {
                continue;
            }
        }
        by_case
            .entry((r.dataset.clone(), r.feature_set.clone(), r.run))
            .or_default()
            .entry(r.method.clone())
            .or_default()
            .insert(r.fold, r.accuracy);
    }

    let mut cases = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for (case, per_method) in &by_case {
        let all_folds: BTreeSet<usize> = per_method
            .values()
            .flat_map(|m| m.keys().copied())
            .collect();
        let complete = methods.iter().all(|m| {
            per_method
                .get(m)
                .is_some_and(|folds| folds.len() == all_folds.len())
        });
        if !complete || all_folds.is_empty() {
            dropped += 1;
            continue;
        }
        let column: Vec<f64> = methods
            .iter()
            .map(|m| {
                let folds = &per_method[m];
                folds.values().sum::<f64>() / folds.len() as f64
            })
            .collect();
        cases.push(case.clone());
        columns.push(column);
    }
    let k = methods.len();
    let n = cases.len();
    let matrix = DMatrix::from_fn(k, n, |i, j| columns[j][i]);
    Ok(CaseTable {
        methods,
        cases,
        matrix,
        dropped,
    })
}

/// Rank analysis over one case table.
#[derive(Debug, Clone, Serialize)]
pub struct RankAnalysis {
    pub cases: usize,
    pub dropped_cases: usize,
    pub mean_ranks: BTreeMap<String, f64>,
    /// None when fewer than 3 methods or 2 cases.
    pub friedman_statistic: Option<f64>,
    pub friedman_p_value: Option<f64>,
    pub critical_difference: Option<f64>,
    /// (better, worse) pairs whose mean-rank gap exceeds the critical
    /// difference.
    pub significant_pairs: Vec<(String, String)>,
}

fn analyze_ranks(table: &CaseTable) -> Option<RankAnalysis> {
    let k = table.methods.len();
    let n = table.cases.len();
    if n == 0 {
        return None;
    }
    // Mean ranks directly from the table (rank 1 = most accurate).
    let mut sums = vec![0.0; k];
    for j in 0..n {
        let column: Vec<f64> = (0..k).map(|i| table.matrix[(i, j)]).collect();
        for (i, r) in rank_descending(&column).into_iter().enumerate() {
            sums[i] += r;
        }
    }
    let mean_ranks: BTreeMap<String, f64> = table
        .methods
        .iter()
        .cloned()
        .zip(sums.iter().map(|s| s / n as f64))
        .collect();

    let friedman: Option<FriedmanResult> = if k >= 3 && n >= 2 {
        friedman_test(&table.matrix).ok()
    } else {
        None
    };
    let cd = if (2..=20).contains(&k) {
        nemenyi_cd(k, n, 0.05).ok()
    } else {
        None
    };
    let mut significant_pairs = Vec::new();
    if let Some(cd) = cd {
        let mut order: Vec<&String> = table.methods.iter().collect();
        order.sort_by(|a, b| mean_ranks[*a].total_cmp(&mean_ranks[*b]));
        for (ai, a) in order.iter().enumerate() {
            for b in order.iter().skip(ai + 1) {
                if mean_ranks[*b] - mean_ranks[*a] > cd {
                    significant_pairs.push(((*a).clone(), (*b).clone()));
                }
            }
        }
    }
    Some(RankAnalysis {
        cases: n,
        dropped_cases: table.dropped,
        mean_ranks,
        friedman_statistic: friedman.as_ref().map(|f| f.statistic),
        friedman_p_value: friedman.as_ref().map(|f| f.p_value),
        critical_difference: cd,
        significant_pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub feature_set: String,
    pub method: String,
    pub mean_accuracy: f64,
    /// Sample standard deviation over the run × fold measurements.
    pub std_accuracy: f64,
    pub measurements: usize,
}

/// Everything `summary.json` holds.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub complete: bool,
    pub expected_cells: usize,
    pub recorded_cells: usize,
    pub failed_cells: usize,
    pub datasets: Vec<String>,
    pub feature_sets: Vec<String>,
    pub methods: Vec<String>,
    pub aggregates: Vec<AggregateRow>,
    pub overall: Option<RankAnalysis>,
    pub per_feature_set: BTreeMap<String, RankAnalysis>,
    /// Most frequently selected value of each tuned parameter, per method.
    pub selected_param_modes: BTreeMap<String, BTreeMap<String, f64>>,
    pub failures: Vec<BenchFailure>,
}

#[derive(Serialize)]
struct RankRow<'a> {
    method: &'a str,
    mean_accuracy: f64,
    mean_rank: Option<f64>,
}

/// Writes `results.csv`, `ranks.csv`, `summary.json`, and
/// `cd_diagram.svg` into `out_dir` and returns the summary.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<ReportSummary> {
    std::fs::create_dir_all(out_dir)?;

    let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(
        out_dir.join("results.csv"),
    )?));
    for record in &report.records {
        csv.serialize(record)
            .map_err(|e| Error::invalid(format!("writing results.csv: {e}")))?;
    }
    csv.flush()?;

    let aggregates = aggregate_rows(&report.records);
    let overall = analyze_ranks(&accuracy_cases(report, None)?);
    let mut per_feature_set = BTreeMap::new();
    let mut ordered_sets = report.feature_sets.clone();
    ordered_sets.sort_by_key(|s| feature_set_size(s));
    for fs in &ordered_sets {
        if let Some(analysis) = analyze_ranks(&accuracy_cases(report, Some(fs))?) {
            per_feature_set.insert(fs.clone(), analysis);
        }
    }

    let summary = ReportSummary {
        complete: report.is_complete(),
        expected_cells: report.expected_cells,
        recorded_cells: report.records.len(),
        failed_cells: report.failures.len(),
        datasets: report.datasets.clone(),
        feature_sets: ordered_sets,
        methods: report.methods.iter().map(|m| m.as_str().to_string()).collect(),
        aggregates,
        overall,
        per_feature_set,
        selected_param_modes: param_modes(&report.records),
        failures: report.failures.clone(),
    };

    let mut ranks_csv = csv::Writer::from_writer(BufWriter::new(File::create(
        out_dir.join("ranks.csv"),
    )?));
    let mut per_method_acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in &report.records {
        let entry = per_method_acc.entry(r.method.as_str()).or_insert((0.0, 0));
        entry.0 += r.accuracy;
        entry.1 += 1;
    }
    for method in &summary.methods {
        let (sum, count) = per_method_acc.get(method.as_str()).copied().unwrap_or((0.0, 0));
        ranks_csv
            .serialize(RankRow {
                method,
                mean_accuracy: if count > 0 { sum / count as f64 } else { f64::NAN },
                mean_rank: summary
                    .overall
                    .as_ref()
                    .and_then(|a| a.mean_ranks.get(method).copied()),
            })
            .map_err(|e| Error::invalid(format!("writing ranks.csv: {e}")))?;
    }
    ranks_csv.flush()?;

    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::invalid(format!("serializing summary: {e}")))?;
    let mut f = BufWriter::new(File::create(out_dir.join("summary.json"))?);
    writeln!(f, "{json}")?;
    f.flush()?;

    let svg = match &summary.overall {
        Some(analysis) => cd_diagram_svg(analysis),
        None => placeholder_svg("no complete cases to rank"),
    };
    std::fs::write(out_dir.join("cd_diagram.svg"), svg)?;

    Ok(summary)
}

fn aggregate_rows(records: &[BenchRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, usize, String, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((
                r.dataset.clone(),
                feature_set_size(&r.feature_set),
                r.feature_set.clone(),
                r.method.clone(),
            ))
            .or_default()
            .push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((dataset, _, feature_set, method), accs)| {
            let n = accs.len();
            let mean = accs.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            AggregateRow {
                dataset,
                feature_set,
                method,
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
                measurements: n,
            }
        })
        .collect()
}

fn param_modes(records: &[BenchRecord]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut values: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let parsed: serde_json::Value = match serde_json::from_str(&r.params_json) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if let serde_json::Value::Object(map) = parsed {
            let slot = values.entry(r.method.clone()).or_default();
            for (key, value) in map {
                if let Some(x) = value.as_f64() {
                    slot.entry(key).or_default().push(x);
                }
            }
        }
    }
    values
        .into_iter()
        .filter_map(|(method, params)| {
            let modes: BTreeMap<String, f64> = params
                .into_iter()
                .filter_map(|(k, vs)| mode_value(&vs).map(|m| (k, m)))
                .collect();
            if modes.is_empty() {
                None
            } else {
                Some((method, modes))
            }
        })
        .collect()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn placeholder_svg(message: &str) -> String {
    format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"60\">\n",
            "  <text x=\"20\" y=\"35\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
            "</svg>\n"
        ),
        xml_escape(message)
    )
}

/// Renders the classic critical-difference diagram: a rank axis with one
/// stem per method and thick bars joining groups whose mean ranks are
/// within the critical difference of each other.
pub fn cd_diagram_svg(analysis: &RankAnalysis) -> String {
    let mut entries: Vec<(&String, f64)> = analysis
        .mean_ranks
        .iter()
        .map(|(m, &r)| (m, r))
        .collect();
    entries.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    let k = entries.len();
    if k < 2 {
        return placeholder_svg("need at least two methods");
    }

    let width = 860.0;
    let margin = 150.0;
    let span = width - 2.0 * margin;
    let axis_y = 70.0;
    let x = |rank: f64| margin + (rank - 1.0) / (k as f64 - 1.0) * span;

    let left_count = k.div_ceil(2);
    let rows_per_side = left_count;
    let height = 95.0 + rows_per_side as f64 * 22.0 + 20.0;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{axis_y}\" x2=\"{}\" y2=\"{axis_y}\" stroke=\"black\"/>\n",
        x(1.0),
        x(k as f64)
    ));
    for tick in 1..=k {
        let tx = x(tick as f64);
        svg.push_str(&format!(
            "  <line x1=\"{tx}\" y1=\"{}\" x2=\"{tx}\" y2=\"{axis_y}\" stroke=\"black\"/>\n",
            axis_y - 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{tx}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{tick}</text>\n",
            axis_y - 10.0
        ));
    }

    if let Some(cd) = analysis.critical_difference {
        let cd_end = x((1.0 + cd).min(k as f64));
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"30\" x2=\"{cd_end}\" y2=\"30\" stroke=\"black\"/>\n",
            x(1.0)
        ));
        for ex in [x(1.0), cd_end] {
            svg.push_str(&format!(
                "  <line x1=\"{ex}\" y1=\"26\" x2=\"{ex}\" y2=\"34\" stroke=\"black\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"22\" font-size=\"12\" text-anchor=\"middle\">CD = {cd:.3}</text>\n",
            (x(1.0) + cd_end) / 2.0
        ));
    }

    // Group bars: maximal runs of methods whose rank spread fits inside CD.
    if let Some(cd) = analysis.critical_difference {
        let mut bars: Vec<(usize, usize)> = Vec::new();
        for i in 0..k {
            let mut j = i;
            while j + 1 < k && entries[j + 1].1 - entries[i].1 <= cd {
                j += 1;
            }
            if j > i && !bars.iter().any(|&(bi, bj)| bi <= i && j <= bj) {
                bars.push((i, j));
            }
        }
        for (level, (i, j)) in bars.iter().enumerate() {
            let by = axis_y + 8.0 + (level % 4) as f64 * 7.0;
            svg.push_str(&format!(
                "  <line x1=\"{}\" y1=\"{by}\" x2=\"{}\" y2=\"{by}\" stroke=\"black\" \
                 stroke-width=\"4\" stroke-linecap=\"round\"/>\n",
                x(entries[*i].1) - 2.0,
                x(entries[*j].1) + 2.0
            ));
        }
    }

    // Left side: best-ranked methods; right side: the rest, worst at top.
    for (idx, (name, rank)) in entries.iter().take(left_count).enumerate() {
        let ly = 100.0 + (idx as f64 + 1.0) * 22.0;
        let sx = x(*rank);
        svg.push_str(&format!(
            "  <polyline points=\"{sx},{axis_y} {sx},{ly} {},{ly}\" fill=\"none\" stroke=\"black\"/>\n",
            margin - 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"end\">{} ({rank:.2})</text>\n",
            margin - 10.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    for (idx, (name, rank)) in entries.iter().skip(left_count).rev().enumerate() {
        let ly = 100.0 + (idx as f64 + 1.0) * 22.0;
        let sx = x(*rank);
        svg.push_str(&format!(
            "  <polyline points=\"{sx},{axis_y} {sx},{ly} {},{ly}\" fill=\"none\" stroke=\"black\"/>\n",
            width - margin + 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"start\">({rank:.2}) {}</text>\n",
            width - margin + 10.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
