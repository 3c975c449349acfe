use ndarray::Array2;

use crate::data::{ColumnData, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes { codes: Vec<u32>, n_classes: usize },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { codes, .. } => codes.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Targets::Classes { .. })
    }
}

/// Design matrix for predicting one column from all the others.
///
/// Categoricals are one-hot. Numericals are standardized with the training
/// table's statistics when the target is categorical and left raw when it is
/// numerical.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    target: usize,
    /// Per column: `(shift, scale)` for numericals, `None` otherwise.
    standardize: Vec<Option<(f64, f64)>>,
    width: usize,
}

impl FeatureEncoder {
    pub fn fit(train: &Table, target: usize) -> Result<Self> {
        if target >= train.n_cols() {
            return Err(Error::invalid(format!("target column {target} out of range")));
        }
        if train.n_rows() == 0 {
            return Err(Error::invalid("cannot fit a predictor on an empty table"));
        }
        let classify = train.schema().columns[target].kind.is_categorical();
        let mut standardize = Vec::with_capacity(train.n_cols());
        let mut width = 0;
        for (j, (spec, col)) in train.schema().columns.iter().zip(train.columns()).enumerate() {
            if j == target {
                standardize.push(None);
                continue;
            }
            match col {
                ColumnData::Numerical(v) => {
                    width += 1;
                    standardize.push(Some(if classify {
                        let n = v.len() as f64;
                        let mean = v.iter().sum::<f64>() / n;
                        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                        (mean, if sd > 0.0 { sd } else { 1.0 })
                    } else {
                        (0.0, 1.0)
                    }));
                }
                ColumnData::Categorical(_) => {
                    width += spec.kind.cardinality().expect("categorical");
                    standardize.push(None);
                }
            }
        }
        Ok(FeatureEncoder { target, standardize, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn features(&self, t: &Table) -> Result<Array2<f64>> {
        if t.n_cols() != self.standardize.len() {
            return Err(Error::shape(self.standardize.len(), t.n_cols()));
        }
        let mut x = Array2::zeros((t.n_rows(), self.width));
        let mut offset = 0;
        for (j, (spec, col)) in t.schema().columns.iter().zip(t.columns()).enumerate() {
            if j == self.target {
                continue;
            }
            match col {
                ColumnData::Numerical(v) => {
                    let (shift, scale) = self.standardize[j].expect("numerical column");
                    for (i, &val) in v.iter().enumerate() {
                        x[[i, offset]] = (val - shift) / scale;
                    }
                    offset += 1;
                }
                ColumnData::Categorical(c) => {
                    for (i, &code) in c.iter().enumerate() {
                        x[[i, offset + code as usize]] = 1.0;
                    }
                    offset += spec.kind.cardinality().expect("categorical");
                }
            }
        }
        Ok(x)
    }

    pub fn targets(&self, t: &Table) -> Targets {
        match t.column(self.target) {
            ColumnData::Numerical(v) => Targets::Values(v.clone()),
            ColumnData::Categorical(c) => Targets::Classes {
                codes: c.clone(),
                n_classes: t.schema().columns[self.target].kind.cardinality().expect("categorical"),
            },
        }
    }
}
