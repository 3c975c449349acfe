//! Seeded synthetic datasets used as fixtures and for desk-scale experiments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ColumnData, ColumnKind, ColumnSpec, Schema, Table, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalSpec {
    pub name: String,
    pub components: Vec<MixtureComponent>,
    /// Optional per-category mean shift keyed by a categorical column name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_by: Option<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub priors: Vec<f64>,
}

/// Binary label `1` when `bias + Σ w·x + Σ effect[c] + noise·N(0,1) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRule {
    pub name: String,
    pub numerical_weights: Vec<f64>,
    pub category_effects: Vec<Vec<f64>>,
    pub bias: f64,
    pub noise: f64,
}

/// Description of a toy dataset: numerical columns, then categorical
/// columns, then the optional binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub numerical: Vec<NumericalSpec>,
    pub categorical: Vec<CategoricalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetRule>,
}

fn label(i: usize) -> String {
    ((b'a' + i as u8) as char).to_string()
}

impl ToySpec {
    /// One two-mode numerical column and one three-class categorical column.
    pub fn two_column() -> Self {
        ToySpec {
            numerical: vec![NumericalSpec {
                name: "x".into(),
                components: vec![
                    MixtureComponent { weight: 0.5, mean: -2.0, std: 0.3 },
                    MixtureComponent { weight: 0.5, mean: 2.0, std: 0.3 },
                ],
                shift_by: None,
            }],
            categorical: vec![CategoricalSpec { name: "c".into(), priors: vec![0.6, 0.3, 0.1] }],
            target: None,
        }
    }

    /// The desk-scale benchmark table: a bimodal and a category-shifted
    /// numerical column, a three-class categorical column and a binary target.
    pub fn standard() -> Self {
        let mut spec = Self::two_column();
        spec.numerical.push(NumericalSpec {
            name: "y".into(),
            components: vec![MixtureComponent { weight: 1.0, mean: 0.0, std: 1.0 }],
            shift_by: Some(("c".into(), vec![-1.0, 0.0, 1.5])),
        });
        spec.target = Some(TargetRule {
            name: "label".into(),
            numerical_weights: vec![1.0, 0.8],
            category_effects: vec![vec![0.0, 0.5, -1.0]],
            bias: 0.0,
            noise: 0.7,
        });
        spec
    }

    fn validate(&self) -> Result<()> {
        if self.numerical.is_empty() || self.categorical.is_empty() {
            return Err(Error::invalid("toy spec needs at least one numerical and one categorical column"));
        }
        for c in &self.categorical {
            let total: f64 = c.priors.iter().sum();
            if c.priors.is_empty() || (total - 1.0).abs() > 1e-9 || c.priors.iter().any(|&p| p < 0.0) {
                return Err(Error::invalid(format!("priors of `{}` must form a probability vector", c.name)));
            }
        }
        for n in &self.numerical {
            let total: f64 = n.components.iter().map(|m| m.weight).sum();
            if n.components.is_empty() || (total - 1.0).abs() > 1e-9 || n.components.iter().any(|m| m.weight < 0.0) {
                return Err(Error::invalid(format!("mixture weights of `{}` must sum to 1", n.name)));
            }
            if n.components.iter().any(|m| !(m.std > 0.0)) {
                return Err(Error::invalid(format!("mixture stds of `{}` must be positive", n.name)));
            }
            if let Some((by, shifts)) = &n.shift_by {
                let cat = self
                    .categorical
                    .iter()
                    .find(|c| &c.name == by)
                    .ok_or_else(|| Error::invalid(format!("`{}` shifts by unknown column `{by}`", n.name)))?;
                if shifts.len() != cat.priors.len() {
                    return Err(Error::invalid(format!("`{}` needs one shift per category of `{by}`", n.name)));
                }
            }
        }
        if let Some(t) = &self.target {
            if t.numerical_weights.len() != self.numerical.len()
                || t.category_effects.len() != self.categorical.len()
                || t.category_effects.iter().zip(&self.categorical).any(|(e, c)| e.len() != c.priors.len())
            {
                return Err(Error::invalid("target rule dimensions do not match the columns"));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<Schema> {
        let mut columns: Vec<ColumnSpec> = self
            .numerical
            .iter()
            .map(|n| ColumnSpec { name: n.name.clone(), kind: ColumnKind::Numerical })
            .collect();
        columns.extend(self.categorical.iter().map(|c| ColumnSpec {
            name: c.name.clone(),
            kind: ColumnKind::Categorical { categories: (0..c.priors.len()).map(label).collect() },
        }));
        let target = self.target.as_ref().map(|t| {
            columns.push(ColumnSpec {
                name: t.name.clone(),
                kind: ColumnKind::Categorical { categories: vec!["0".into(), "1".into()] },
            });
            t.name.clone()
        });
        Schema::new(columns, target, Task::Classification)
    }

    /// Draws `n` i.i.d. rows.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Table> {
        self.validate()?;
        let schema = self.schema()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cats: Vec<Vec<u32>> = vec![Vec::with_capacity(n); self.categorical.len()];
        let mut nums: Vec<Vec<f64>> = vec![Vec::with_capacity(n); self.numerical.len()];
        let mut target = Vec::with_capacity(n);
        for _ in 0..n {
            for (c, spec) in self.categorical.iter().enumerate() {
                cats[c].push(draw_index(&spec.priors, &mut rng) as u32);
            }
            for (j, spec) in self.numerical.iter().enumerate() {
                let weights: Vec<f64> = spec.components.iter().map(|m| m.weight).collect();
                let comp = spec.components[draw_index(&weights, &mut rng)];
                let z: f64 = StandardNormal.sample(&mut rng);
                let mut x = comp.mean + comp.std * z;
                if let Some((by, shifts)) = &spec.shift_by {
                    let c = self.categorical.iter().position(|c| &c.name == by).expect("validated");
                    x += shifts[*cats[c].last().expect("drawn above") as usize];
                }
                nums[j].push(x);
            }
            if let Some(rule) = &self.target {
                let mut score = rule.bias;
                for (w, col) in rule.numerical_weights.iter().zip(&nums) {
                    score += w * col.last().expect("drawn above");
                }
                for (effects, col) in rule.category_effects.iter().zip(&cats) {
                    score += effects[*col.last().expect("drawn above") as usize];
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                score += rule.noise * z;
                target.push(u32::from(score > 0.0));
            }
        }
        let mut columns: Vec<ColumnData> = nums.into_iter().map(ColumnData::Numerical).collect();
        columns.extend(cats.into_iter().map(ColumnData::Categorical));
        if self.target.is_some() {
            columns.push(ColumnData::Categorical(target));
        }
        Table::new(schema, columns)
    }
}

fn draw_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_mean_within_three_sigma() {
        let n = 20_000;
        let t = ToySpec::two_column().generate(n, 11).unwrap();
        let x = t.column(0).as_numerical().unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        // mixture variance: 0.3^2 + 2^2
        let sigma = (0.09f64 + 4.0).sqrt();
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn class_prior_frequency() {
        let mut spec = ToySpec::two_column();
        spec.categorical[0].priors = vec![0.9, 0.1];
        let t = spec.generate(10_000, 5).unwrap();
        let c = t.column(1).as_categorical().unwrap();
        let freq = c.iter().filter(|&&v| v == 1).count() as f64 / 10_000.0;
        assert!((freq - 0.1).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn empty_and_deterministic() {
        let spec = ToySpec::standard();
        assert_eq!(spec.generate(0, 1).unwrap().n_rows(), 0);
        assert_eq!(spec.generate(50, 9).unwrap(), spec.generate(50, 9).unwrap());
        assert_eq!(spec.generate(5, 1).unwrap().n_cols(), 4);
    }

    #[test]
    fn rejects_bad_priors() {
        let mut spec = ToySpec::two_column();
        spec.categorical[0].priors = vec![0.5, 0.4];
        assert!(spec.generate(10, 1).is_err());
    }
}
