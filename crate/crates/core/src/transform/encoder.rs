use std::ops::Range;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gmm::{fit_gmm, GmmConfig, GmmModel};
use crate::data::{ColumnData, Schema, Table};
use crate::error::{Error, Result};
use crate::util::argmax;

/// Mode-specific normalization of one value: picks a mode by sampling the
/// posterior over active modes, then `alpha = (value - mean) / (4 std)`
/// clipped to `[-1, 1]`. Returns `(alpha, component index)`.
pub fn encode_numerical<R: Rng>(g: &GmmModel, value: f64, rng: &mut R) -> (f64, usize) {
    let modes = g.active_modes();
    let probs = g.responsibilities(value);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = modes.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = i;
            break;
        }
    }
    let k = modes[pick];
    let alpha = ((value - g.means[k]) / (4.0 * g.stds[k])).clamp(-1.0, 1.0);
    (alpha, k)
}

/// Inverse of [`encode_numerical`]; `mode` is a component index.
pub fn decode_numerical(g: &GmmModel, alpha: f64, mode: usize) -> Result<f64> {
    if mode >= g.n_components() || !g.active[mode] {
        return Err(Error::invalid(format!("mode {mode} is not an active mixture component")));
    }
    Ok(g.means[mode] + 4.0 * g.stds[mode] * alpha.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpanKind {
    /// One alpha slot at `start`, then one indicator slot per active mode.
    Numerical { modes: Vec<usize> },
    Categorical { categories: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub column: usize,
    pub start: usize,
    pub width: usize,
    pub kind: SpanKind,
}

impl ColumnSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.width
    }

    /// The one-hot part of the span (mode indicators or categories).
    pub fn onehot_range(&self) -> Range<usize> {
        match self.kind {
            SpanKind::Numerical { .. } => self.start + 1..self.start + self.width,
            SpanKind::Categorical { .. } => self.range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedLayout {
    pub spans: Vec<ColumnSpan>,
    pub width: usize,
}

impl EncodedLayout {
    /// Alpha slot positions.
    pub fn alpha_slots(&self) -> Vec<usize> {
        self.spans
            .iter()
            .filter(|s| matches!(s.kind, SpanKind::Numerical { .. }))
            .map(|s| s.start)
            .collect()
    }

    /// All one-hot spans in layout order (mode indicators and categories).
    pub fn onehot_spans(&self) -> Vec<Range<usize>> {
        self.spans.iter().map(ColumnSpan::onehot_range).collect()
    }

    /// One-hot ranges of categorical columns only, in column order.
    pub fn categorical_spans(&self) -> Vec<Range<usize>> {
        self.spans
            .iter()
            .filter(|s| matches!(s.kind, SpanKind::Categorical { .. }))
            .map(ColumnSpan::range)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnTransform {
    Numerical(GmmModel),
    Categorical { categories: usize },
}

/// Fitted per-column encoders. Construct with [`DataTransformer::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTransformer {
    schema: Schema,
    columns: Vec<ColumnTransform>,
    layout: EncodedLayout,
}

impl DataTransformer {
    pub fn fit<R: Rng>(table: &Table, config: &GmmConfig, rng: &mut R) -> Result<Self> {
        if table.n_rows() == 0 {
            return Err(Error::invalid("cannot fit a transformer on an empty table"));
        }
        let mut columns = Vec::with_capacity(table.n_cols());
        for (i, data) in table.columns().iter().enumerate() {
            columns.push(match data {
                ColumnData::Numerical(v) => {
                    let fit = fit_gmm(v, config, rng)?;
                    if fit.model.degenerate {
                        log::warn!("column `{}` is constant; using a degenerate single mode", table.schema().columns[i].name);
                    }
                    ColumnTransform::Numerical(fit.model)
                }
                ColumnData::Categorical(_) => ColumnTransform::Categorical {
                    categories: table.schema().columns[i].kind.cardinality().expect("categorical"),
                },
            });
        }
        Ok(Self::from_parts(table.schema().clone(), columns))
    }

    pub fn from_parts(schema: Schema, columns: Vec<ColumnTransform>) -> Self {
        let mut spans = Vec::with_capacity(columns.len());
        let mut start = 0;
        for (column, t) in columns.iter().enumerate() {
            let (kind, width) = match t {
                ColumnTransform::Numerical(g) => {
                    let modes = g.active_modes();
                    let w = 1 + modes.len();
                    (SpanKind::Numerical { modes }, w)
                }
                ColumnTransform::Categorical { categories } => {
                    (SpanKind::Categorical { categories: *categories }, *categories)
                }
            };
            spans.push(ColumnSpan { column, start, width, kind });
            start += width;
        }
        DataTransformer { schema, columns, layout: EncodedLayout { spans, width: start } }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn layout(&self) -> &EncodedLayout {
        &self.layout
    }

    pub fn output_width(&self) -> usize {
        self.layout.width
    }

    pub fn column_transforms(&self) -> &[ColumnTransform] {
        &self.columns
    }

    /// Encodes every row; mode indicators and categorical spans are hard one-hot.
    pub fn transform<R: Rng>(&self, table: &Table, rng: &mut R) -> Result<Array2<f64>> {
        if table.schema().columns != self.schema.columns {
            return Err(Error::Schema("table does not match the transformer's schema".into()));
        }
        let mut out = Array2::zeros((table.n_rows(), self.layout.width));
        for (span, (data, t)) in self.layout.spans.iter().zip(table.columns().iter().zip(&self.columns)) {
            match (data, t, &span.kind) {
                (ColumnData::Numerical(v), ColumnTransform::Numerical(g), SpanKind::Numerical { modes }) => {
                    for (r, &x) in v.iter().enumerate() {
                        let (alpha, k) = encode_numerical(g, x, rng);
                        let slot = modes.iter().position(|&m| m == k).expect("active mode");
                        out[[r, span.start]] = alpha;
                        out[[r, span.start + 1 + slot]] = 1.0;
                    }
                }
                (ColumnData::Categorical(v), ColumnTransform::Categorical { .. }, _) => {
                    for (r, &c) in v.iter().enumerate() {
                        out[[r, span.start + c as usize]] = 1.0;
                    }
                }
                _ => unreachable!("schema checked above"),
            }
        }
        Ok(out)
    }

    /// Decodes rows back to a table; each one-hot span is read by argmax
    /// with ties going to the lowest index.
    pub fn inverse_transform(&self, encoded: ArrayView2<'_, f64>) -> Result<Table> {
        if encoded.ncols() != self.layout.width {
            return Err(Error::shape(format!("{} encoded columns", self.layout.width), encoded.ncols()));
        }
        let mut columns = Vec::with_capacity(self.columns.len());
        for (span, t) in self.layout.spans.iter().zip(&self.columns) {
            match (t, &span.kind) {
                (ColumnTransform::Numerical(g), SpanKind::Numerical { modes }) => {
                    let onehot = span.onehot_range();
                    let mut values = Vec::with_capacity(encoded.nrows());
                    for row in encoded.rows() {
                        let slot = argmax(row.slice(ndarray::s![onehot.clone()]));
                        values.push(decode_numerical(g, row[span.start], modes[slot])?);
                    }
                    columns.push(ColumnData::Numerical(values));
                }
                (ColumnTransform::Categorical { .. }, _) => {
                    let r = span.range();
                    columns.push(ColumnData::Categorical(
                        encoded.rows().into_iter().map(|row| argmax(row.slice(ndarray::s![r.clone()])) as u32).collect(),
                    ));
                }
                _ => unreachable!("layout built from the same transforms"),
            }
        }
        Table::new(self.schema.clone(), columns)
    }
}
