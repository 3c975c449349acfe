//! Mixed-type association matrices: Pearson between numerical columns,
//! Cramér's V between categorical columns, and the correlation ratio across.

use ndarray::Array2;

use crate::data::{ColumnData, Table};
use crate::error::{Error, Result};
use crate::util::pearson;

/// Cramér's V without bias correction.
///
/// Categories that never occur are dropped before the degrees of freedom are
/// counted; a table with a single populated row or column scores 0.
pub fn cramers_v(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::invalid("Cramér's V of empty columns"));
    }
    let ra = *a.iter().max().expect("non-empty") as usize + 1;
    let rb = *b.iter().max().expect("non-empty") as usize + 1;
    let mut table = vec![0usize; ra * rb];
    for (&x, &y) in a.iter().zip(b) {
        table[x as usize * rb + y as usize] += 1;
    }
    let row_sums: Vec<usize> = (0..ra).map(|i| table[i * rb..(i + 1) * rb].iter().sum()).collect();
    let col_sums: Vec<usize> = (0..rb).map(|j| (0..ra).map(|i| table[i * rb + j]).sum()).collect();
    let r = row_sums.iter().filter(|&&s| s > 0).count();
    let c = col_sums.iter().filter(|&&s| s > 0).count();
    if r.min(c) <= 1 {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let mut chi2 = 0.0;
    for i in 0..ra {
        for j in 0..rb {
            if row_sums[i] == 0 || col_sums[j] == 0 {
                continue;
            }
            let expected = row_sums[i] as f64 * col_sums[j] as f64 / n;
            let diff = table[i * rb + j] as f64 - expected;
            chi2 += diff * diff / expected;
        }
    }
    Ok((chi2 / (n * (r.min(c) - 1) as f64)).sqrt().min(1.0))
}

/// η = sqrt(between-category SS / total SS); zero total SS gives 0.
pub fn correlation_ratio(categories: &[u32], values: &[f64]) -> Result<f64> {
    if categories.len() != values.len() {
        return Err(Error::shape(categories.len(), values.len()));
    }
    if values.is_empty() {
        return Err(Error::invalid("correlation ratio of empty columns"));
    }
    let k = *categories.iter().max().expect("non-empty") as usize + 1;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&c, &v) in categories.iter().zip(values) {
        sums[c as usize] += v;
        counts[c as usize] += 1;
    }
    let grand = values.iter().sum::<f64>() / values.len() as f64;
    let total: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| n as f64 * (s / n as f64 - grand).powi(2))
        .sum();
    Ok((between / total).sqrt().min(1.0))
}

/// Symmetric association matrix over all columns of `t`.
///
/// Pearson entries keep their sign; an undefined Pearson (constant column)
/// is stored as 0.
pub fn association_matrix(t: &Table) -> Result<Array2<f64>> {
    let d = t.n_cols();
    let mut m = Array2::<f64>::eye(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let v = match (t.column(i), t.column(j)) {
                (ColumnData::Numerical(a), ColumnData::Numerical(b)) => pearson(a, b).unwrap_or(0.0),
                (ColumnData::Categorical(a), ColumnData::Categorical(b)) => cramers_v(a, b)?,
                (ColumnData::Categorical(c), ColumnData::Numerical(v))
                | (ColumnData::Numerical(v), ColumnData::Categorical(c)) => correlation_ratio(c, v)?,
            };
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(m)
}

/// Mean absolute entrywise difference of the two association matrices.
pub fn associations_difference(real: &Table, synth: &Table) -> Result<f64> {
    if real.schema() != synth.schema() {
        return Err(Error::invalid("association comparison needs tables with one schema"));
    }
    let a = association_matrix(real)?;
    let b = association_matrix(synth)?;
    Ok((&a - &b).mapv(f64::abs).mean().unwrap_or(0.0))
}
