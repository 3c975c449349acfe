//! Per-column marginal fidelity on fixed grids.
//!
//! Numerical columns are min-max scaled with parameters taken from the pooled
//! real data and binned on a uniform grid over `[0, 1]`; values outside the
//! range land in the end bins. Categorical columns get one bin per category
//! at unit spacing.

use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, ColumnKind, Table};
use crate::error::{Error, Result};
use crate::transform::MinMax;
use crate::util::pearson;

pub const DEFAULT_BINS: [usize; 3] = [25, 50, 100];

/// Normalized histogram with the position of every bin.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHistogram {
    positions: Vec<f64>,
    mass: Vec<f64>,
}

impl GridHistogram {
    pub fn from_masses(positions: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if positions.len() != mass.len() || mass.is_empty() {
            return Err(Error::shape(format!("{} bin positions", positions.len()), format!("{} masses", mass.len())));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("bin positions must be strictly increasing"));
        }
        if mass.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::invalid("bin masses must be non-negative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("bin masses sum to {total}, not 1")));
        }
        Ok(GridHistogram { positions, mass })
    }

    /// Histogram of already-scaled values over `bins` uniform bins on [0, 1].
    pub fn numerical(scaled: &[f64], bins: usize) -> Result<Self> {
        if scaled.is_empty() {
            return Err(Error::invalid("histogram of an empty column"));
        }
        if bins == 0 {
            return Err(Error::invalid("bin count must be positive"));
        }
        let mut counts = vec![0usize; bins];
        for &v in scaled {
            let b = (v * bins as f64).floor();
            let b = if b.is_nan() { 0.0 } else { b.clamp(0.0, (bins - 1) as f64) };
            counts[b as usize] += 1;
        }
        let positions = (0..bins).map(|i| (i as f64 + 0.5) / bins as f64).collect();
        Ok(Self::from_counts(positions, &counts, scaled.len()))
    }

    pub fn categorical(codes: &[u32], cardinality: usize) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::invalid("histogram of an empty column"));
        }
        let counts = crate::data::category_counts(codes, cardinality);
        let positions = (0..cardinality).map(|i| i as f64).collect();
        Ok(Self::from_counts(positions, &counts, codes.len()))
    }

    fn from_counts(positions: Vec<f64>, counts: &[usize], n: usize) -> Self {
        let mass = counts.iter().map(|&c| c as f64 / n as f64).collect();
        GridHistogram { positions, mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    fn check_same_grid(&self, other: &GridHistogram) -> Result<()> {
        if self.positions != other.positions {
            return Err(Error::shape(format!("grid of {} bins", self.positions.len()), format!("grid of {} bins", other.positions.len())));
        }
        Ok(())
    }
}

pub fn histogram_intersection(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    p.check_same_grid(q)?;
    Ok(p.mass.iter().zip(&q.mass).map(|(a, b)| a.min(*b)).sum())
}

/// Square root of the base-2 Jensen-Shannon divergence.
pub fn jensen_shannon_distance(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    p.check_same_grid(q)?;
    let kl_to_mid = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    let js: f64 = p
        .mass
        .iter()
        .zip(&q.mass)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * kl_to_mid(a, m) + 0.5 * kl_to_mid(b, m)
        })
        .sum();
    Ok(js.clamp(0.0, 1.0).sqrt())
}

/// W1 distance: integral of the absolute CDF difference over the grid.
pub fn wasserstein_1d(p: &GridHistogram, q: &GridHistogram) -> Result<f64> {
    p.check_same_grid(q)?;
    let (mut cp, mut cq, mut w) = (0.0, 0.0, 0.0);
    for i in 0..p.mass.len().saturating_sub(1) {
        cp += p.mass[i];
        cq += q.mass[i];
        w += (cp - cq).abs() * (p.positions[i + 1] - p.positions[i]);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnCorrelation {
    pub value: f64,
    /// A mass vector had zero variance; the value is the histogram intersection.
    pub fallback: bool,
}

/// Pearson correlation of the two mass vectors, clamped to [0, 1].
pub fn column_correlation(p: &GridHistogram, q: &GridHistogram) -> Result<ColumnCorrelation> {
    p.check_same_grid(q)?;
    Ok(match pearson(&p.mass, &q.mass) {
        Some(r) => ColumnCorrelation { value: r.clamp(0.0, 1.0), fallback: false },
        None => ColumnCorrelation { value: histogram_intersection(p, q)?, fallback: true },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalScores {
    pub histogram_intersection: f64,
    pub jensen_shannon_distance: f64,
    pub wasserstein_distance: f64,
    pub column_correlation: f64,
}

impl MarginalScores {
    fn compare(p: &GridHistogram, q: &GridHistogram) -> Result<(Self, bool)> {
        let cc = column_correlation(p, q)?;
        Ok((
            MarginalScores {
                histogram_intersection: histogram_intersection(p, q)?,
                jensen_shannon_distance: jensen_shannon_distance(p, q)?,
                wasserstein_distance: wasserstein_1d(p, q)?,
                column_correlation: cc.value,
            },
            cc.fallback,
        ))
    }

    fn mean_of(items: &[MarginalScores]) -> Self {
        let n = items.len() as f64;
        let avg = |f: fn(&MarginalScores) -> f64| items.iter().map(f).sum::<f64>() / n;
        MarginalScores {
            histogram_intersection: avg(|s| s.histogram_intersection),
            jensen_shannon_distance: avg(|s| s.jensen_shannon_distance),
            wasserstein_distance: avg(|s| s.wasserstein_distance),
            column_correlation: avg(|s| s.column_correlation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScores {
    pub bins: usize,
    pub scores: MarginalScores,
    pub correlation_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMarginal {
    pub column: String,
    /// Mean over `per_bins` for numerical columns.
    pub scores: MarginalScores,
    /// Empty for categorical columns.
    pub per_bins: Vec<BinScores>,
    pub correlation_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalBreakdown {
    pub columns: Vec<ColumnMarginal>,
    /// Column average of the per-column scores.
    pub mean: MarginalScores,
}

/// Compares every column of `synth` with `real`.
///
/// `pooled` supplies the min-max parameters for numerical columns; it should
/// hold all real rows (train and test).
pub fn marginal_scores(synth: &Table, real: &Table, pooled: &Table, bins: &[usize]) -> Result<MarginalBreakdown> {
    let schema = real.schema();
    if synth.schema() != schema || pooled.schema() != schema {
        return Err(Error::invalid("marginal comparison needs tables with one schema"));
    }
    if schema.is_empty() {
        return Err(Error::invalid("marginal comparison of a table without columns"));
    }
    if bins.is_empty() {
        return Err(Error::invalid("at least one bin count is required"));
    }
    let mut columns = Vec::with_capacity(schema.len());
    for (j, spec) in schema.columns.iter().enumerate() {
        let col = match (&spec.kind, real.column(j), synth.column(j)) {
            (ColumnKind::Categorical { categories }, ColumnData::Categorical(r), ColumnData::Categorical(s)) => {
                let p = GridHistogram::categorical(r, categories.len())?;
                let q = GridHistogram::categorical(s, categories.len())?;
                let (scores, fallback) = MarginalScores::compare(&p, &q)?;
                ColumnMarginal { column: spec.name.clone(), scores, per_bins: Vec::new(), correlation_fallback: fallback }
            }
            (ColumnKind::Numerical, ColumnData::Numerical(r), ColumnData::Numerical(s)) => {
                let pooled_values = pooled.column(j).as_numerical().expect("schema checked");
                let mm = MinMax::fit(pooled_values)?;
                let rs: Vec<f64> = r.iter().map(|&x| mm.apply(x)).collect();
                let ss: Vec<f64> = s.iter().map(|&x| mm.apply(x)).collect();
                let mut per_bins = Vec::with_capacity(bins.len());
                for &b in bins {
                    let p = GridHistogram::numerical(&rs, b)?;
                    let q = GridHistogram::numerical(&ss, b)?;
                    let (scores, fallback) = MarginalScores::compare(&p, &q)?;
                    per_bins.push(BinScores { bins: b, scores, correlation_fallback: fallback });
                }
                let scores = MarginalScores::mean_of(&per_bins.iter().map(|b| b.scores).collect::<Vec<_>>());
                let fallback = per_bins.iter().any(|b| b.correlation_fallback);
                ColumnMarginal { column: spec.name.clone(), scores, per_bins, correlation_fallback: fallback }
            }
            _ => return Err(Error::invalid(format!("column `{}` does not match its declared kind", spec.name))),
        };
        columns.push(col);
    }
    let mean = MarginalScores::mean_of(&columns.iter().map(|c| c.scores).collect::<Vec<_>>());
    Ok(MarginalBreakdown { columns, mean })
}
