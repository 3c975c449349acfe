//! Columnar tables with a typed schema.
//!
//! A [`Table`] is immutable once built. Categorical cells are stored as
//! indices into the category list declared by the [`Schema`], so one-hot
//! layouts stay stable across subsamples of the same dataset.

mod io;
mod toy;

use std::collections::HashSet;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_csv, load_schema, read_csv, save_schema, write_csv};
pub use toy::{CategoricalSpec, MixtureComponent, NumericalSpec, TargetRule, ToySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical { categories: Vec<String> },
}

impl ColumnKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }

    /// Number of categories, or `None` for numerical columns.
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            ColumnKind::Numerical => None,
            ColumnKind::Categorical { categories } => Some(categories.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub task: Task,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, target: Option<String>, task: Task) -> Result<Self> {
        let schema = Schema { columns, target, task };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", col.name)));
            }
            if let ColumnKind::Categorical { categories } = &col.kind {
                if categories.is_empty() {
                    return Err(Error::Schema(format!("categorical column `{}` has no categories", col.name)));
                }
                let mut labels = HashSet::new();
                for label in categories {
                    if !labels.insert(label.as_str()) {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` lists `{label}` twice",
                            col.name
                        )));
                    }
                }
            }
        }
        if let Some(target) = &self.target {
            let idx = self
                .index_of(target)
                .ok_or_else(|| Error::Schema(format!("target `{target}` is not a column")))?;
            let categorical = self.columns[idx].kind.is_categorical();
            match (self.task, categorical) {
                (Task::Classification, false) => {
                    return Err(Error::Schema(format!("classification target `{target}` must be categorical")))
                }
                (Task::Regression, true) => {
                    return Err(Error::Schema(format!("regression target `{target}` must be numerical")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target.as_deref().and_then(|t| self.index_of(t))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Cell storage for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numerical(Vec<f64>),
    Categorical(Vec<u32>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numerical(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numerical(&self) -> Option<&[f64]> {
        match self {
            ColumnData::Numerical(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u32]> {
        match self {
            ColumnData::Categorical(v) => Some(v),
            ColumnData::Numerical(_) => None,
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numerical(v) => ColumnData::Numerical(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Requested subsample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubsetSize {
    Rows(usize),
    Full,
}

impl SubsetSize {
    /// Label used in tables and directory names; `Full` prints as `-1`.
    pub fn label(&self) -> String {
        match self {
            SubsetSize::Rows(n) => n.to_string(),
            SubsetSize::Full => "-1".to_string(),
        }
    }
}

impl std::str::FromStr for SubsetSize {
    type Err = Error;

    /// Accepts a positive row count, `-1` or `full`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-1" => Ok(SubsetSize::Full),
            t if t.eq_ignore_ascii_case("full") => Ok(SubsetSize::Full),
            t => match t.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(SubsetSize::Rows(n)),
                _ => Err(Error::invalid(format!("bad subset size `{s}`"))),
            },
        }
    }
}

impl Serialize for SubsetSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SubsetSize::Rows(n) => s.serialize_u64(*n as u64),
            SubsetSize::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for SubsetSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(-1) => Ok(SubsetSize::Full),
            Raw::Num(n) if n >= 1 => Ok(SubsetSize::Rows(n as usize)),
            Raw::Str(s) if s.eq_ignore_ascii_case("full") => Ok(SubsetSize::Full),
            _ => Err(serde::de::Error::custom("subset size must be a positive integer, -1 or \"full\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    schema: Schema,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Table {
    /// Builds a table, checking column count, kinds, lengths and category bounds.
    pub fn new(schema: Schema, columns: Vec<ColumnData>) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.len() {
            return Err(Error::shape(format!("{} columns", schema.len()), columns.len()));
        }
        let n_rows = columns.first().map_or(0, ColumnData::len);
        for (spec, data) in schema.columns.iter().zip(&columns) {
            if data.len() != n_rows {
                return Err(Error::shape(
                    format!("{n_rows} rows in column `{}`", spec.name),
                    data.len(),
                ));
            }
            match (&spec.kind, data) {
                (ColumnKind::Numerical, ColumnData::Numerical(v)) => {
                    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::invalid(format!(
                            "non-finite value in column `{}` at row {i}",
                            spec.name
                        )));
                    }
                }
                (ColumnKind::Categorical { categories }, ColumnData::Categorical(v)) => {
                    if let Some(i) = v.iter().position(|&c| c as usize >= categories.len()) {
                        return Err(Error::invalid(format!(
                            "category index {} out of range in column `{}` at row {i}",
                            v[i], spec.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!("column `{}` storage does not match its kind", spec.name)))
                }
            }
        }
        Ok(Table { schema, columns, n_rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &ColumnData {
        &self.columns[i]
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// New table holding the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Row-wise concatenation of two tables with identical schemas.
    pub fn concat(&self, other: &Table) -> Result<Table> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot concatenate tables with different schemas".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| match (a, b) {
                (ColumnData::Numerical(x), ColumnData::Numerical(y)) => {
                    ColumnData::Numerical(x.iter().chain(y).copied().collect())
                }
                (ColumnData::Categorical(x), ColumnData::Categorical(y)) => {
                    ColumnData::Categorical(x.iter().chain(y).copied().collect())
                }
                _ => unreachable!("schemas are equal"),
            })
            .collect();
        Ok(Table { schema: self.schema.clone(), columns, n_rows: self.n_rows + other.n_rows })
    }

    /// Same rows with the target designation (and task) replaced.
    pub fn with_target(&self, target: Option<String>, task: Task) -> Result<Table> {
        let schema = Schema::new(self.schema.columns.clone(), target, task)?;
        Ok(Table { schema, columns: self.columns.clone(), n_rows: self.n_rows })
    }

    /// Rendered cell value, using category labels for categorical columns.
    pub fn cell_string(&self, row: usize, col: usize) -> String {
        match (&self.columns[col], &self.schema.columns[col].kind) {
            (ColumnData::Numerical(v), _) => v[row].to_string(),
            (ColumnData::Categorical(v), ColumnKind::Categorical { categories }) => {
                categories[v[row] as usize].clone()
            }
            _ => unreachable!("validated at construction"),
        }
    }
}

/// Uniform random train/test partition. Returns `(train, test)`.
///
/// The test part gets `round(test_fraction * rows)` rows, clamped so that
/// both parts are non-empty.
pub fn split(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::invalid(format!("cannot split a table with {n} rows")));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let (test_rows, train_rows) = order.split_at(n_test);
    let mut train_rows = train_rows.to_vec();
    let mut test_rows = test_rows.to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((table.select_rows(&train_rows), table.select_rows(&test_rows)))
}

/// Draws `n` rows uniformly without replacement; `Full` returns a copy of the input.
pub fn subsample(table: &Table, n: SubsetSize, seed: u64) -> Result<Table> {
    match n {
        SubsetSize::Full => Ok(table.clone()),
        SubsetSize::Rows(0) => Err(Error::invalid("subsample size must be at least 1")),
        SubsetSize::Rows(k) if k > table.n_rows() => Err(Error::invalid(format!(
            "subsample size {k} exceeds table size {}",
            table.n_rows()
        ))),
        SubsetSize::Rows(k) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut rows = index::sample(&mut rng, table.n_rows(), k).into_vec();
            rows.sort_unstable();
            Ok(table.select_rows(&rows))
        }
    }
}

/// Per-category counts of a categorical column.
pub fn category_counts(codes: &[u32], cardinality: usize) -> Vec<usize> {
    let mut counts = vec![0usize; cardinality];
    for &c in codes {
        counts[c as usize] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_table(n: usize) -> Table {
        let schema = Schema::new(
            vec![
                ColumnSpec { name: "x".into(), kind: ColumnKind::Numerical },
                ColumnSpec {
                    name: "c".into(),
                    kind: ColumnKind::Categorical { categories: vec!["a".into(), "b".into()] },
                },
            ],
            None,
            Task::Classification,
        )
        .unwrap();
        Table::new(
            schema,
            vec![
                ColumnData::Numerical((0..n).map(|i| i as f64).collect()),
                ColumnData::Categorical((0..n).map(|i| (i % 2) as u32).collect()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let t = toy_table(10);
        let (train, test) = split(&t, 0.3, 7).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (7, 3));
        let (train2, test2) = split(&t, 0.3, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);

        let mut all: Vec<f64> = train.column(0).as_numerical().unwrap().to_vec();
        all.extend_from_slice(test.column(0).as_numerical().unwrap());
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_adult_sizes() {
        let t = toy_table(48740);
        let (train, test) = split(&t, 14622.0 / 48740.0, 1).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (34118, 14622));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let t = toy_table(10);
        assert!(split(&t, 0.0, 1).is_err());
        assert!(split(&t, 1.0, 1).is_err());
        assert!(split(&toy_table(1), 0.5, 1).is_err());
    }

    #[test]
    fn subsample_full_and_subset() {
        let t = toy_table(100);
        assert_eq!(subsample(&t, SubsetSize::Full, 3).unwrap(), t);
        let s = subsample(&t, SubsetSize::Rows(40), 3).unwrap();
        assert_eq!(s.n_rows(), 40);
        let xs = s.column(0).as_numerical().unwrap();
        let mut uniq: Vec<f64> = xs.to_vec();
        uniq.dedup();
        assert_eq!(uniq.len(), 40);
        assert!(xs.iter().all(|x| (0.0..100.0).contains(x)));
        assert_eq!(s, subsample(&t, SubsetSize::Rows(40), 3).unwrap());
        assert!(subsample(&t, SubsetSize::Rows(101), 3).is_err());
    }

    #[test]
    fn schema_validation() {
        let dup = Schema::new(
            vec![
                ColumnSpec { name: "a".into(), kind: ColumnKind::Numerical },
                ColumnSpec { name: "a".into(), kind: ColumnKind::Numerical },
            ],
            None,
            Task::Regression,
        );
        assert!(dup.is_err());
        let bad_target = Schema::new(
            vec![ColumnSpec { name: "a".into(), kind: ColumnKind::Numerical }],
            Some("a".into()),
            Task::Classification,
        );
        assert!(bad_target.is_err());
        let empty_cats = Schema::new(
            vec![ColumnSpec { name: "a".into(), kind: ColumnKind::Categorical { categories: vec![] } }],
            None,
            Task::Regression,
        );
        assert!(empty_cats.is_err());
    }

    #[test]
    fn subset_size_serde() {
        let sizes: Vec<SubsetSize> = serde_json::from_str(r#"[40, "full", -1]"#).unwrap();
        assert_eq!(sizes, vec![SubsetSize::Rows(40), SubsetSize::Full, SubsetSize::Full]);
        assert_eq!(serde_json::to_string(&sizes).unwrap(), r#"[40,"full","full"]"#);
        assert!(SubsetSize::Rows(20480) < SubsetSize::Full);
        for size in [SubsetSize::Rows(640), SubsetSize::Full] {
            assert_eq!(size.label().parse::<SubsetSize>().unwrap(), size);
        }
        assert!("0".parse::<SubsetSize>().is_err());
    }
}
