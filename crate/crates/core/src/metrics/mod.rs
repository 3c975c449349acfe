//! Fidelity and utility metrics for synthetic tables.
//!
//! All comparisons are against held-out real rows (`test`); the real
//! training rows only contribute to the min-max parameters of the marginal
//! histograms.

pub mod joint;
pub mod marginal;
pub mod pairwise;
pub mod utility;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use joint::{distance_to_closest_record, likelihood_approximation, JointEncoder, NeighborConfig};
pub use marginal::{
    column_correlation, histogram_intersection, jensen_shannon_distance, marginal_scores, wasserstein_1d, BinScores,
    ColumnCorrelation, ColumnMarginal, GridHistogram, MarginalBreakdown, MarginalScores, DEFAULT_BINS,
};
pub use pairwise::{association_matrix, associations_difference, correlation_ratio, cramers_v};
pub use utility::{dimension_wise_prediction, ml_efficacy, DimensionWise, ModelScore, UtilityConfig, UtilityScore};

use crate::data::Table;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MlEfficacy,
    DimensionWisePrediction,
    DistanceToClosestRecord,
    LikelihoodApproximation,
    AssociationsDifference,
    HistogramIntersection,
    JensenShannonDistance,
    WassersteinDistance,
    ColumnCorrelation,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::MlEfficacy,
        Metric::DimensionWisePrediction,
        Metric::DistanceToClosestRecord,
        Metric::LikelihoodApproximation,
        Metric::AssociationsDifference,
        Metric::HistogramIntersection,
        Metric::JensenShannonDistance,
        Metric::WassersteinDistance,
        Metric::ColumnCorrelation,
    ];

    /// One metric per evaluation dimension: utility, joint, column-pair and
    /// marginal fidelity.
    pub const REPRESENTATIVE: [Metric; 4] = [
        Metric::MlEfficacy,
        Metric::LikelihoodApproximation,
        Metric::AssociationsDifference,
        Metric::HistogramIntersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MlEfficacy => "ml_efficacy",
            Metric::DimensionWisePrediction => "dimension_wise_prediction",
            Metric::DistanceToClosestRecord => "distance_to_closest_record",
            Metric::LikelihoodApproximation => "likelihood_approximation",
            Metric::AssociationsDifference => "associations_difference",
            Metric::HistogramIntersection => "histogram_intersection",
            Metric::JensenShannonDistance => "jensen_shannon_distance",
            Metric::WassersteinDistance => "wasserstein_distance",
            Metric::ColumnCorrelation => "column_correlation",
        }
    }

    /// Whether a larger value means closer to the real data.
    pub fn higher_is_better(self) -> bool {
        !matches!(
            self,
            Metric::LikelihoodApproximation
                | Metric::AssociationsDifference
                | Metric::JensenShannonDistance
                | Metric::WassersteinDistance
        )
    }

    fn index(self) -> usize {
        Metric::ALL.iter().position(|&m| m == self).expect("listed")
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub metrics: Vec<Metric>,
    pub bins: Vec<usize>,
    pub neighbors: NeighborConfig,
    pub utility: UtilityConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metrics: Metric::ALL.to_vec(),
            bins: DEFAULT_BINS.to_vec(),
            neighbors: NeighborConfig::default(),
            utility: UtilityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset: String,
    /// Subset size label; `-1` for the full training set.
    pub subset: String,
    /// Model variant, or `real` for the reference.
    pub variant: String,
    pub seed: Option<u64>,
    pub trial: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub meta: ReportMeta,
    pub scores: BTreeMap<Metric, f64>,
    /// Neighbour rank used by the two distance metrics.
    pub neighbor_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginal: Option<MarginalBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml_efficacy: Option<UtilityScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension_wise: Option<DimensionWise>,
    pub notes: Vec<String>,
}

const COLUMN_CORRELATION_NOTE: &str = "column_correlation is the Pearson correlation of histogram mass vectors";

impl MetricReport {
    pub fn score(&self, m: Metric) -> Option<f64> {
        self.scores.get(&m).copied()
    }

    pub fn csv_header() -> String {
        let mut cols = vec!["dataset", "subset", "variant", "seed", "trial"];
        cols.extend(Metric::ALL.iter().map(|m| m.name()));
        cols.join(",")
    }

    /// One CSV line in [`csv_header`](Self::csv_header) order; metrics that
    /// were not computed are empty.
    pub fn csv_row(&self) -> String {
        let m = &self.meta;
        let mut cells = vec![
            m.dataset.clone(),
            m.subset.clone(),
            m.variant.clone(),
            m.seed.map(|s| s.to_string()).unwrap_or_default(),
            m.trial.map(|t| t.to_string()).unwrap_or_default(),
        ];
        cells.extend(Metric::ALL.iter().map(|k| self.score(*k).map(|v| v.to_string()).unwrap_or_default()));
        cells.join(",")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Checks that every score is finite and that breakdowns average back to
    /// their scalars (within `tol`).
    pub fn check_consistency(&self, tol: f64) -> Result<()> {
        if let Some((m, v)) = self.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{m} is not finite ({v})")));
        }
        let close = |m: Metric, v: f64| match self.score(m) {
            Some(s) if (s - v).abs() > tol => Err(Error::invalid(format!("{m} = {s} but its breakdown gives {v}"))),
            _ => Ok(()),
        };
        let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
        if let Some(b) = &self.marginal {
            close(Metric::HistogramIntersection, mean(b.columns.iter().map(|c| c.scores.histogram_intersection).collect()))?;
            close(Metric::JensenShannonDistance, mean(b.columns.iter().map(|c| c.scores.jensen_shannon_distance).collect()))?;
            close(Metric::WassersteinDistance, mean(b.columns.iter().map(|c| c.scores.wasserstein_distance).collect()))?;
            close(Metric::ColumnCorrelation, mean(b.columns.iter().map(|c| c.scores.column_correlation).collect()))?;
        }
        if let Some(u) = &self.ml_efficacy {
            close(Metric::MlEfficacy, mean(u.models.iter().map(|m| m.score).collect()))?;
        }
        if let Some(d) = &self.dimension_wise {
            close(Metric::DimensionWisePrediction, mean(d.columns.iter().map(|c| c.score).collect()))?;
        }
        Ok(())
    }
}

/// Evaluates `synth` against the real `test` rows.
///
/// Every metric draws from its own stream derived from `seed`, so the value
/// of one metric does not depend on which others were requested.
pub fn evaluate(synth: &Table, train: &Table, test: &Table, config: &EvalConfig, seed: u64) -> Result<MetricReport> {
    if synth.schema() != test.schema() || train.schema() != test.schema() {
        return Err(Error::invalid("synthetic, train and test tables must share one schema"));
    }
    if synth.n_rows() == 0 || test.n_rows() == 0 {
        return Err(Error::invalid("evaluation needs non-empty synthetic and test tables"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let streams: Vec<u64> = Metric::ALL.iter().map(|_| master.random()).collect();
    let rng_for = |m: Metric| ChaCha8Rng::seed_from_u64(streams[m.index()]);
    let wants = |m: Metric| config.metrics.contains(&m);

    let mut report = MetricReport {
        meta: ReportMeta::default(),
        scores: BTreeMap::new(),
        neighbor_k: config.neighbors.k,
        marginal: None,
        ml_efficacy: None,
        dimension_wise: None,
        notes: Vec::new(),
    };

    if wants(Metric::MlEfficacy) {
        let u = ml_efficacy(synth, test, &config.utility, &mut rng_for(Metric::MlEfficacy))?;
        report.scores.insert(Metric::MlEfficacy, u.score);
        report.ml_efficacy = Some(u);
    }
    if wants(Metric::DimensionWisePrediction) {
        let d = dimension_wise_prediction(synth, test, &config.utility, &mut rng_for(Metric::DimensionWisePrediction))?;
        report.scores.insert(Metric::DimensionWisePrediction, d.score);
        report.dimension_wise = Some(d);
    }
    if wants(Metric::DistanceToClosestRecord) {
        let v = distance_to_closest_record(synth, test, &config.neighbors, &mut rng_for(Metric::DistanceToClosestRecord))?;
        report.scores.insert(Metric::DistanceToClosestRecord, v);
    }
    if wants(Metric::LikelihoodApproximation) {
        let v = likelihood_approximation(test, synth, &config.neighbors, &mut rng_for(Metric::LikelihoodApproximation))?;
        report.scores.insert(Metric::LikelihoodApproximation, v);
    }
    if wants(Metric::AssociationsDifference) {
        report.scores.insert(Metric::AssociationsDifference, associations_difference(test, synth)?);
    }
    let marginal_metrics = [
        Metric::HistogramIntersection,
        Metric::JensenShannonDistance,
        Metric::WassersteinDistance,
        Metric::ColumnCorrelation,
    ];
    if marginal_metrics.iter().any(|&m| wants(m)) {
        let pooled = train.concat(test)?;
        let b = marginal_scores(synth, test, &pooled, &config.bins)?;
        let values = [
            b.mean.histogram_intersection,
            b.mean.jensen_shannon_distance,
            b.mean.wasserstein_distance,
            b.mean.column_correlation,
        ];
        for (m, v) in marginal_metrics.iter().zip(values) {
            if wants(*m) {
                report.scores.insert(*m, v);
            }
        }
        if wants(Metric::ColumnCorrelation) {
            report.notes.push(COLUMN_CORRELATION_NOTE.to_string());
            for c in b.columns.iter().filter(|c| c.correlation_fallback) {
                report.notes.push(format!("column_correlation of `{}` fell back to histogram intersection", c.column));
            }
        }
        report.marginal = Some(b);
    }
    if let Some(u) = &report.ml_efficacy {
        for m in u.models.iter().filter(|m| m.degenerate) {
            report.notes.push(format!("ml_efficacy: {} degenerated to a constant predictor", m.model));
        }
    }
    report.check_consistency(1e-9)?;
    Ok(report)
}
