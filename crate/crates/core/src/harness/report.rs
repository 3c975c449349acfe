//! Aggregation of cell reports into plot-ready tables.
//!
//! Scores are averaged over (seed × trial) jointly; the mean of per-seed
//! means is recorded next to it. Cross-dataset figures are the unweighted
//! mean of per-dataset means.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::REFERENCE_VARIANT;
use crate::data::SubsetSize;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricReport};
use crate::util::pearson;

/// `100·(reference − score)/reference`: positive when the score falls short
/// of the reference, negative when it exceeds it. `None` for a zero or
/// non-finite reference.
pub fn relative_error(score: f64, reference: f64) -> Option<f64> {
    if reference == 0.0 || !reference.is_finite() || !score.is_finite() {
        return None;
    }
    Some(100.0 * (reference - score) / reference)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SummaryKey {
    pub dataset: String,
    pub size: SubsetSize,
    pub variant: String,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub key: SummaryKey,
    pub cells: usize,
    /// Mean over all (seed, trial) cells.
    pub mean: f64,
    /// Mean over seeds of the per-seed trial means.
    pub mean_of_seed_means: f64,
    pub reference: Option<f64>,
    pub relative_error: Option<f64>,
}

fn parse_size(r: &MetricReport) -> Result<SubsetSize> {
    r.meta.subset.parse()
}

/// Per (dataset, size, variant, metric) means of the synthetic cells, with
/// the matching real reference.
pub fn summarize(reports: &[MetricReport]) -> Result<Vec<SummaryRow>> {
    let mut refs: BTreeMap<(String, SubsetSize, Metric), f64> = BTreeMap::new();
    // key → seed → scores
    let mut groups: BTreeMap<SummaryKey, BTreeMap<Option<u64>, Vec<f64>>> = BTreeMap::new();
    for r in reports {
        let size = parse_size(r)?;
        for (&metric, &v) in &r.scores {
            if r.meta.variant == REFERENCE_VARIANT {
                refs.insert((r.meta.dataset.clone(), size, metric), v);
            } else {
                let key = SummaryKey { dataset: r.meta.dataset.clone(), size, variant: r.meta.variant.clone(), metric };
                groups.entry(key).or_default().entry(r.meta.seed).or_default().push(v);
            }
        }
    }
    Ok(groups
        .into_iter()
        .map(|(key, by_seed)| {
            let all: Vec<f64> = by_seed.values().flatten().copied().collect();
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let seed_means: Vec<f64> = by_seed.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let mean_of_seed_means = seed_means.iter().sum::<f64>() / seed_means.len() as f64;
            let reference = refs.get(&(key.dataset.clone(), key.size, key.metric)).copied();
            let relative_error = reference.and_then(|r| relative_error(mean, r));
            SummaryRow { key, cells: all.len(), mean, mean_of_seed_means, reference, relative_error }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDatasetRow {
    pub size: SubsetSize,
    pub variant: String,
    pub metric: Metric,
    pub datasets: usize,
    pub mean: f64,
    /// Mean of the per-dataset relative errors (datasets without a reference
    /// are left out).
    pub relative_error: Option<f64>,
}

/// Unweighted mean over datasets of the per-dataset summaries.
pub fn cross_dataset_mean(rows: &[SummaryRow]) -> Vec<CrossDatasetRow> {
    let mut groups: BTreeMap<(SubsetSize, String, Metric), Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.key.size, r.key.variant.clone(), r.key.metric)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((size, variant, metric), rs)| {
            let mean = rs.iter().map(|r| r.mean).sum::<f64>() / rs.len() as f64;
            let errs: Vec<f64> = rs.iter().filter_map(|r| r.relative_error).collect();
            let relative_error = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
            CrossDatasetRow { size, variant, metric, datasets: rs.len(), mean, relative_error }
        })
        .collect()
}

/// Relative-error table for one metric: one row per variant, one column per
/// subset size in descending order (`-1`, the full set, first).
pub fn appendix_table(rows: &[CrossDatasetRow], metric: Metric) -> String {
    let mut sizes: Vec<SubsetSize> = rows.iter().filter(|r| r.metric == metric).map(|r| r.size).collect();
    sizes.sort();
    sizes.dedup();
    sizes.reverse();
    let mut variants: Vec<&str> = rows.iter().filter(|r| r.metric == metric).map(|r| r.variant.as_str()).collect();
    variants.sort();
    variants.dedup();
    let mut out = String::from("subset");
    for s in &sizes {
        out.push(',');
        out.push_str(&s.label());
    }
    out.push('\n');
    for v in variants {
        out.push_str(v);
        for s in &sizes {
            out.push(',');
            let cell = rows.iter().find(|r| r.metric == metric && r.variant == v && r.size == *s);
            if let Some(e) = cell.and_then(|r| r.relative_error) {
                out.push_str(&format!("{e:.2}"));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub metrics: Vec<Metric>,
    /// |Pearson r| between metric vectors over cells; `None` where a metric
    /// is constant across cells.
    pub values: Vec<Vec<Option<f64>>>,
    /// Metrics with zero variance across cells.
    pub undefined: Vec<Metric>,
}

/// Absolute Pearson correlation among the metrics present in every report.
pub fn metric_correlation(reports: &[MetricReport]) -> CorrelationMatrix {
    let metrics: Vec<Metric> = Metric::ALL
        .into_iter()
        .filter(|m| !reports.is_empty() && reports.iter().all(|r| r.scores.contains_key(m)))
        .collect();
    let vectors: Vec<Vec<f64>> = metrics.iter().map(|m| reports.iter().map(|r| r.scores[m]).collect()).collect();
    let undefined: Vec<Metric> = metrics
        .iter()
        .zip(&vectors)
        .filter(|(_, v)| v.windows(2).all(|w| w[0] == w[1]))
        .map(|(m, _)| *m)
        .collect();
    let values = vectors
        .iter()
        .map(|a| vectors.iter().map(|b| pearson(a, b).map(|r| r.abs().min(1.0))).collect())
        .collect();
    CorrelationMatrix { metrics, values, undefined }
}

fn collect_report_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_report_files(&path, out)?;
        } else if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".report.json")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Every `*.report.json` below `dir`, in path order.
pub fn load_reports(dir: impl AsRef<Path>) -> Result<Vec<MetricReport>> {
    let mut files = Vec::new();
    collect_report_files(dir.as_ref(), &mut files)?;
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            MetricReport::from_json(&text)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::invalid(format!("unknown report format `{s}` (csv|json)"))),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: ReportFormat,
    reports: usize,
    synthetic_cells: usize,
    reference_cells: usize,
    metrics: Vec<Metric>,
    files: Vec<String>,
    averaging: &'a str,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    summary: &'a [SummaryRow],
    cross_dataset: &'a [CrossDatasetRow],
    relative_error_tables: BTreeMap<String, String>,
    metric_correlation: &'a CorrelationMatrix,
}

const AVERAGING: &str = "scores are averaged over seed x trial jointly (mean); mean_of_seed_means averages trials within each seed first; cross-dataset rows are unweighted means of per-dataset means";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes the aggregate files for every report below `cells` into `out` and
/// returns their paths. The output depends only on the report files, so
/// re-running over unchanged cells reproduces it byte for byte.
pub fn report(cells: impl AsRef<Path>, out: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let out = out.as_ref();
    let reports = load_reports(cells)?;
    if reports.is_empty() {
        return Err(Error::invalid("no *.report.json files found"));
    }
    let (refs, synth): (Vec<&MetricReport>, Vec<&MetricReport>) =
        reports.iter().partition(|r| r.meta.variant == REFERENCE_VARIANT);
    let summary = summarize(&reports)?;
    let cross = cross_dataset_mean(&summary);
    let synth_owned: Vec<MetricReport> = synth.iter().map(|r| (*r).clone()).collect();
    let corr = metric_correlation(&synth_owned);
    let metrics: Vec<Metric> = Metric::ALL.into_iter().filter(|m| reports.iter().any(|r| r.scores.contains_key(m))).collect();

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<(String, String)> = Vec::new();
    match format {
        ReportFormat::Csv => {
            let mut long = vec![["dataset", "subset", "variant", "seed", "trial", "metric", "score"].map(String::from).to_vec()];
            for r in &reports {
                for (m, v) in &r.scores {
                    long.push(vec![
                        r.meta.dataset.clone(),
                        r.meta.subset.clone(),
                        r.meta.variant.clone(),
                        r.meta.seed.map(|s| s.to_string()).unwrap_or_default(),
                        r.meta.trial.map(|t| t.to_string()).unwrap_or_default(),
                        m.name().to_string(),
                        v.to_string(),
                    ]);
                }
            }
            files.push(("scores_long.csv".into(), csv_string(long)?));

            let mut sum = vec![["dataset", "subset", "variant", "metric", "cells", "mean", "mean_of_seed_means", "reference", "relative_error"]
                .map(String::from)
                .to_vec()];
            for r in &summary {
                sum.push(vec![
                    r.key.dataset.clone(),
                    r.key.size.label(),
                    r.key.variant.clone(),
                    r.key.metric.name().into(),
                    r.cells.to_string(),
                    r.mean.to_string(),
                    r.mean_of_seed_means.to_string(),
                    opt(r.reference),
                    opt(r.relative_error),
                ]);
            }
            files.push(("summary.csv".into(), csv_string(sum)?));

            for &m in &metrics {
                files.push((format!("relative_error_{}.csv", m.name()), appendix_table(&cross, m)));
            }

            let mut header = vec![String::from("metric")];
            header.extend(corr.metrics.iter().map(|m| m.name().to_string()));
            let mut rows = vec![header];
            for (m, row) in corr.metrics.iter().zip(&corr.values) {
                let mut r = vec![m.name().to_string()];
                r.extend(row.iter().map(|v| opt(*v)));
                rows.push(r);
            }
            files.push(("metric_correlation.csv".into(), csv_string(rows)?));
        }
        ReportFormat::Json => {
            let tables = metrics.iter().map(|&m| (m.name().to_string(), appendix_table(&cross, m))).collect();
            let body = JsonReport { summary: &summary, cross_dataset: &cross, relative_error_tables: tables, metric_correlation: &corr };
            files.push(("report.json".into(), serde_json::to_string_pretty(&body)?));
        }
    }
    let manifest = Manifest {
        format,
        reports: reports.len(),
        synthetic_cells: synth.len(),
        reference_cells: refs.len(),
        metrics,
        files: files.iter().map(|(n, _)| n.clone()).collect(),
        averaging: AVERAGING,
    };
    files.push(("manifest.json".into(), serde_json::to_string_pretty(&manifest)?));

    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ReportMeta;

    fn rep(dataset: &str, subset: &str, variant: &str, seed: Option<u64>, trial: Option<usize>, scores: &[(Metric, f64)]) -> MetricReport {
        MetricReport {
            meta: ReportMeta {
                dataset: dataset.into(),
                subset: subset.into(),
                variant: variant.into(),
                seed,
                trial,
            },
            scores: scores.iter().copied().collect(),
            neighbor_k: 1,
            marginal: None,
            ml_efficacy: None,
            dimension_wise: None,
            notes: Vec::new(),
        }
    }

    #[test]
    fn relative_error_convention() {
        assert_eq!(relative_error(0.4, 0.8), Some(50.0));
        assert_eq!(relative_error(0.8, 0.8), Some(0.0));
        assert!(relative_error(0.9, 0.8).unwrap() < 0.0);
        assert_eq!(relative_error(0.5, 0.0), None);
    }

    #[test]
    fn joint_and_nested_means_are_both_kept() {
        let m = Metric::MlEfficacy;
        let reports = vec![
            rep("d", "40", "ctgan", Some(0), Some(0), &[(m, 0.2)]),
            rep("d", "40", "ctgan", Some(0), Some(1), &[(m, 0.4)]),
            rep("d", "40", "ctgan", Some(1), Some(0), &[(m, 0.9)]),
            rep("d", "40", "real", None, None, &[(m, 1.0)]),
        ];
        let s = summarize(&reports).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].mean - 0.5).abs() < 1e-12);
        assert!((s[0].mean_of_seed_means - 0.6).abs() < 1e-12);
        assert!((s[0].relative_error.unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn correlation_of_duplicates_and_negations() {
        let a = Metric::HistogramIntersection;
        let b = Metric::WassersteinDistance;
        let c = Metric::MlEfficacy;
        let reports: Vec<MetricReport> = [(0.1, 0.3), (0.5, 0.2), (0.9, 0.8)]
            .iter()
            .map(|&(x, y)| rep("d", "40", "ctgan", Some(0), Some(0), &[(a, x), (b, -x), (c, y)]))
            .collect();
        let corr = metric_correlation(&reports);
        let ia = corr.metrics.iter().position(|&m| m == a).unwrap();
        let ib = corr.metrics.iter().position(|&m| m == b).unwrap();
        let ic = corr.metrics.iter().position(|&m| m == c).unwrap();
        assert!((corr.values[ia][ia].unwrap() - 1.0).abs() < 1e-12);
        assert!((corr.values[ia][ib].unwrap() - 1.0).abs() < 1e-12);
        // direct formula on x = (0.1, 0.5, 0.9), y = (0.3, 0.2, 0.8)
        let (mx, my) = (0.5, 13.0 / 30.0);
        let x = [0.1, 0.5, 0.9];
        let y = [0.3, 0.2, 0.8];
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        assert!((corr.values[ia][ic].unwrap() - (sxy / (sxx * syy).sqrt()).abs()).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_is_flagged() {
        let a = Metric::HistogramIntersection;
        let reports: Vec<MetricReport> =
            (0..3).map(|i| rep("d", "40", "ctgan", Some(i), Some(0), &[(a, 0.5), (Metric::MlEfficacy, i as f64)])).collect();
        let corr = metric_correlation(&reports);
        assert_eq!(corr.undefined, vec![Metric::HistogramIntersection]);
        assert_eq!(corr.values[0][1], None);
    }

    #[test]
    fn appendix_columns_descend_with_full_first() {
        let m = Metric::MlEfficacy;
        let reports = vec![
            rep("d", "40", "ctgan", Some(0), Some(0), &[(m, 0.4)]),
            rep("d", "-1", "ctgan", Some(0), Some(0), &[(m, 0.9)]),
            rep("d", "640", "ctgan", Some(0), Some(0), &[(m, 0.6)]),
            rep("d", "40", "real", None, None, &[(m, 0.8)]),
            rep("d", "640", "real", None, None, &[(m, 0.8)]),
            rep("d", "-1", "real", None, None, &[(m, 0.8)]),
        ];
        let cross = cross_dataset_mean(&summarize(&reports).unwrap());
        let table = appendix_table(&cross, m);
        assert_eq!(table, "subset,-1,640,40\nctgan,-12.50,25.00,50.00\n");
    }

    #[test]
    fn cross_dataset_mean_matches_per_dataset_average() {
        let m = Metric::HistogramIntersection;
        let reports = vec![
            rep("a", "40", "ctgan", Some(0), Some(0), &[(m, 0.3)]),
            rep("a", "40", "ctgan", Some(1), Some(0), &[(m, 0.5)]),
            rep("b", "40", "ctgan", Some(0), Some(0), &[(m, 0.9)]),
        ];
        let s = summarize(&reports).unwrap();
        let cross = cross_dataset_mean(&s);
        assert_eq!(cross.len(), 1);
        assert!((cross[0].mean - (0.4 + 0.9) / 2.0).abs() < 1e-12);
        assert_eq!(cross[0].datasets, 2);
    }
}
