//! Conditional vectors for training-by-sampling.

use std::ops::Range;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{category_counts, ColumnData, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CondColumn {
    /// Table column index.
    column: usize,
    /// Offset of this column's one-hot block in the cond vector.
    offset: usize,
    counts: Vec<usize>,
}

/// Per-categorical-column category frequencies of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSampler {
    columns: Vec<CondColumn>,
    width: usize,
}

/// Sampled conditions for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CondBatch {
    /// `batch × width` one-hot rows (empty width without categorical columns).
    pub vectors: Array2<f64>,
    /// Index into the sampler's categorical columns, per row.
    pub columns: Vec<usize>,
    pub categories: Vec<usize>,
}

impl CondSampler {
    pub fn fit(table: &Table) -> Self {
        let mut columns = Vec::new();
        let mut offset = 0;
        for (i, data) in table.columns().iter().enumerate() {
            if let ColumnData::Categorical(codes) = data {
                let k = table.schema().columns[i].kind.cardinality().expect("categorical");
                columns.push(CondColumn { column: i, offset, counts: category_counts(codes, k) });
                offset += k;
            }
        }
        CondSampler { columns, width: offset }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Table column index of the `j`-th categorical column.
    pub fn table_column(&self, j: usize) -> usize {
        self.columns[j].column
    }

    pub fn block(&self, j: usize) -> Range<usize> {
        let c = &self.columns[j];
        c.offset..c.offset + c.counts.len()
    }

    pub fn counts(&self, j: usize) -> &[usize] {
        &self.columns[j].counts
    }

    /// Training distribution over categories of column `j`: `∝ ln(1 + count)`.
    pub fn log_frequency_probs(&self, j: usize) -> Vec<f64> {
        let w: Vec<f64> = self.columns[j].counts.iter().map(|&c| (1.0 + c as f64).ln()).collect();
        normalize(w)
    }

    /// Empirical distribution over categories of column `j`.
    pub fn frequency_probs(&self, j: usize) -> Vec<f64> {
        normalize(self.columns[j].counts.iter().map(|&c| c as f64).collect())
    }

    /// Training-time conditions: column uniform, category by log-frequency.
    pub fn sample_cond_vector<R: Rng>(&self, batch: usize, rng: &mut R) -> CondBatch {
        self.sample_with(batch, rng, |s, j| s.log_frequency_probs(j))
    }

    /// Generation-time conditions: column uniform, category by raw frequency.
    pub fn sample_original<R: Rng>(&self, batch: usize, rng: &mut R) -> CondBatch {
        self.sample_with(batch, rng, |s, j| s.frequency_probs(j))
    }

    /// Every row conditioned on the same (column, category).
    pub fn fixed(&self, batch: usize, column: usize, category: usize) -> CondBatch {
        let mut vectors = Array2::zeros((batch, self.width));
        for r in 0..batch {
            vectors[[r, self.columns[column].offset + category]] = 1.0;
        }
        CondBatch { vectors, columns: vec![column; batch], categories: vec![category; batch] }
    }

    fn sample_with<R: Rng>(&self, batch: usize, rng: &mut R, probs: impl Fn(&Self, usize) -> Vec<f64>) -> CondBatch {
        let mut vectors = Array2::zeros((batch, self.width));
        if self.columns.is_empty() {
            return CondBatch { vectors, columns: Vec::new(), categories: Vec::new() };
        }
        let tables: Vec<Vec<f64>> = (0..self.columns.len()).map(|j| cumulative(&probs(self, j))).collect();
        let mut columns = Vec::with_capacity(batch);
        let mut categories = Vec::with_capacity(batch);
        for r in 0..batch {
            let j = rng.random_range(0..self.columns.len());
            let cat = draw(&tables[j], rng);
            vectors[[r, self.columns[j].offset + cat]] = 1.0;
            columns.push(j);
            categories.push(cat);
        }
        CondBatch { vectors, columns, categories }
    }
}

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.into_iter().map(|x| x / total).collect()
    } else {
        let n = w.len() as f64;
        vec![1.0 / n; w.len()]
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn draw<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Training rows grouped by category, for drawing real rows that match a
/// sampled condition.
#[derive(Debug, Clone)]
pub struct RowIndex {
    by_category: Vec<Vec<Vec<usize>>>,
    n_rows: usize,
}

impl RowIndex {
    pub fn new(sampler: &CondSampler, table: &Table) -> Self {
        let by_category = sampler
            .columns
            .iter()
            .map(|c| {
                let codes = table.column(c.column).as_categorical().expect("categorical");
                let mut groups = vec![Vec::new(); c.counts.len()];
                for (r, &code) in codes.iter().enumerate() {
                    groups[code as usize].push(r);
                }
                groups
            })
            .collect();
        RowIndex { by_category, n_rows: table.n_rows() }
    }

    /// A uniformly drawn row whose column `column` has category `category`.
    /// If that category has no rows, a present category is drawn instead.
    pub fn draw<R: Rng>(&self, column: usize, category: usize, rng: &mut R) -> usize {
        let groups = &self.by_category[column];
        let mut cat = category;
        while groups[cat].is_empty() {
            cat = rng.random_range(0..groups.len());
        }
        let rows = &groups[cat];
        rows[rng.random_range(0..rows.len())]
    }

    pub fn draw_any<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.n_rows)
    }
}
