//! Nearest-neighbour distances between synthetic and real rows.
//!
//! Rows are embedded with min-max scaled numericals (parameters from the real
//! test table, no clipping) and one-hot categoricals, then compared in
//! Euclidean distance against a random subsample of at most `cap` test rows.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, ColumnKind, Schema, Table};
use crate::error::{Error, Result};
use crate::transform::MinMax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborConfig {
    pub sample_cap: usize,
    /// Which neighbour to measure against (1 = closest).
    pub k: usize,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        NeighborConfig { sample_cap: 5000, k: 1 }
    }
}

impl NeighborConfig {
    fn validate(&self) -> Result<()> {
        if !(1..=9).contains(&self.k) {
            return Err(Error::invalid(format!("neighbour rank k = {} outside 1..=9", self.k)));
        }
        if self.sample_cap == 0 {
            return Err(Error::invalid("sample cap must be positive"));
        }
        Ok(())
    }
}

/// Min-max + one-hot embedding fitted on a reference table.
#[derive(Debug, Clone)]
pub struct JointEncoder {
    schema: Schema,
    scalers: Vec<Option<MinMax>>,
    width: usize,
}

impl JointEncoder {
    pub fn fit(reference: &Table) -> Result<Self> {
        let mut scalers = Vec::with_capacity(reference.n_cols());
        let mut width = 0;
        for (spec, col) in reference.schema().columns.iter().zip(reference.columns()) {
            match (&spec.kind, col) {
                (ColumnKind::Numerical, ColumnData::Numerical(v)) => {
                    scalers.push(Some(MinMax::fit(v)?));
                    width += 1;
                }
                (ColumnKind::Categorical { categories }, _) => {
                    scalers.push(None);
                    width += categories.len();
                }
                _ => return Err(Error::invalid(format!("column `{}` does not match its kind", spec.name))),
            }
        }
        Ok(JointEncoder { schema: reference.schema().clone(), scalers, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode_rows(&self, t: &Table, rows: &[usize]) -> Result<Array2<f64>> {
        if t.schema() != &self.schema {
            return Err(Error::invalid("table schema differs from the encoder's"));
        }
        let mut out = Array2::zeros((rows.len(), self.width));
        let mut offset = 0;
        for (j, spec) in self.schema.columns.iter().enumerate() {
            match t.column(j) {
                ColumnData::Numerical(v) => {
                    let mm = self.scalers[j].expect("numerical scaler");
                    for (r, &i) in rows.iter().enumerate() {
                        out[[r, offset]] = mm.apply(v[i]);
                    }
                    offset += 1;
                }
                ColumnData::Categorical(c) => {
                    for (r, &i) in rows.iter().enumerate() {
                        out[[r, offset + c[i] as usize]] = 1.0;
                    }
                    offset += spec.kind.cardinality().expect("categorical");
                }
            }
        }
        Ok(out)
    }

    pub fn encode(&self, t: &Table) -> Result<Array2<f64>> {
        self.encode_rows(t, &(0..t.n_rows()).collect::<Vec<_>>())
    }
}

fn capped_rows<R: Rng>(n: usize, cap: usize, rng: &mut R) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        let mut idx = rand::seq::index::sample(rng, n, cap).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Mean over `queries` of the distance to the k-th nearest row of `pool`.
fn mean_kth_distance(queries: &Array2<f64>, pool: &Array2<f64>, k: usize) -> Result<f64> {
    if pool.nrows() < k {
        return Err(Error::invalid(format!("need at least {k} reference rows, have {}", pool.nrows())));
    }
    if queries.nrows() == 0 {
        return Err(Error::invalid("no query rows"));
    }
    let mut best = Vec::with_capacity(k + 1);
    let mut total = 0.0;
    for q in queries.rows() {
        best.clear();
        for p in pool.rows() {
            let mut d2 = 0.0;
            for (a, b) in q.iter().zip(p.iter()) {
                let t = a - b;
                d2 += t * t;
            }
            if best.len() < k || d2 < best[best.len() - 1] {
                let pos = best.partition_point(|&x| x <= d2);
                best.insert(pos, d2);
                best.truncate(k);
            }
        }
        total += best[k - 1].sqrt();
    }
    Ok(total / queries.nrows() as f64)
}

/// Mean distance from each synthetic row to its k-th nearest sampled test row.
pub fn distance_to_closest_record<R: Rng>(synth: &Table, test: &Table, config: &NeighborConfig, rng: &mut R) -> Result<f64> {
    config.validate()?;
    let enc = JointEncoder::fit(test)?;
    let rows = capped_rows(test.n_rows(), config.sample_cap, rng);
    let pool = enc.encode_rows(test, &rows)?;
    let queries = enc.encode(synth)?;
    mean_kth_distance(&queries, &pool, config.k)
}

/// Mean distance from each sampled test row to its k-th nearest synthetic row.
pub fn likelihood_approximation<R: Rng>(test: &Table, synth: &Table, config: &NeighborConfig, rng: &mut R) -> Result<f64> {
    config.validate()?;
    let enc = JointEncoder::fit(test)?;
    let rows = capped_rows(test.n_rows(), config.sample_cap, rng);
    let queries = enc.encode_rows(test, &rows)?;
    let pool = enc.encode(synth)?;
    mean_kth_distance(&queries, &pool, config.k)
}
