//! Downstream-task utility: train on one table, score on real test rows.
//!
//! Categorical targets use logistic regression, a decision tree and an MLP
//! scored by F1; numerical targets use linear regression, a regression tree
//! and an MLP scored by normalized r².

mod features;
mod linear;
mod mlp;
mod scores;
mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{FeatureEncoder, Targets};
pub use linear::{LinearRegression, LogRegConfig, LogisticRegression};
pub use mlp::{MlpConfig, MlpPredictor};
pub use scores::{f1_score, r2, r2_normalized};
pub use tree::{DecisionTree, TreeConfig};

use crate::data::{Table, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityConfig {
    pub logreg: LogRegConfig,
    pub tree: TreeConfig,
    pub mlp: MlpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub score: f64,
    /// The fitted predictor is constant (single-class training target or a
    /// diverged MLP).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScore {
    pub target: String,
    pub task: Task,
    /// Mean over `models`.
    pub score: f64,
    pub models: Vec<ModelScore>,
}

fn score_classes(pred: &[f64], truth: &[u32], n_classes: usize) -> Result<f64> {
    let pred: Vec<u32> = pred.iter().map(|&p| p as u32).collect();
    f1_score(&pred, truth, n_classes)
}

/// Trains the three task-appropriate predictors for column `target` on
/// `train` and scores them on `test`.
pub fn utility_for_target<R: Rng>(train: &Table, test: &Table, target: usize, config: &UtilityConfig, rng: &mut R) -> Result<UtilityScore> {
    if train.schema() != test.schema() {
        return Err(Error::invalid("utility evaluation needs tables with one schema"));
    }
    if test.n_rows() == 0 {
        return Err(Error::invalid("utility evaluation on an empty test table"));
    }
    let mlp_seed: u64 = rng.random();
    let enc = FeatureEncoder::fit(train, target)?;
    let (x_train, x_test) = (enc.features(train)?, enc.features(test)?);
    let (y_train, y_test) = (enc.targets(train), enc.targets(test));
    let name = train.schema().columns[target].name.clone();

    let models = match (&y_train, &y_test) {
        (Targets::Classes { codes, n_classes }, Targets::Classes { codes: truth, .. }) => {
            let k = *n_classes;
            let first = codes[0];
            if codes.iter().all(|&c| c == first) {
                let score = score_classes(&vec![first as f64; truth.len()], truth, k)?;
                ["logistic_regression", "decision_tree", "mlp"]
                    .iter()
                    .map(|m| ModelScore { model: m.to_string(), score, degenerate: true })
                    .collect()
            } else {
                let lr = LogisticRegression::fit(x_train.view(), codes, k, &config.logreg)?;
                let lr_pred: Vec<f64> = lr.predict(x_test.view()).iter().map(|&c| c as f64).collect();
                let tree = DecisionTree::fit(x_train.view(), &y_train, &config.tree)?;
                let mlp = MlpPredictor::fit(x_train.view(), &y_train, &config.mlp, &mut ChaCha8Rng::seed_from_u64(mlp_seed))?;
                vec![
                    ModelScore { model: "logistic_regression".into(), score: score_classes(&lr_pred, truth, k)?, degenerate: false },
                    ModelScore {
                        model: "decision_tree".into(),
                        score: score_classes(&tree.predict(x_test.view()), truth, k)?,
                        degenerate: false,
                    },
                    ModelScore {
                        model: "mlp".into(),
                        score: score_classes(&mlp.predict(x_test.view())?, truth, k)?,
                        degenerate: mlp.diverged,
                    },
                ]
            }
        }
        (Targets::Values(v), Targets::Values(truth)) => {
            let lin = LinearRegression::fit(x_train.view(), v)?;
            let tree = DecisionTree::fit(x_train.view(), &y_train, &config.tree)?;
            let mlp = MlpPredictor::fit(x_train.view(), &y_train, &config.mlp, &mut ChaCha8Rng::seed_from_u64(mlp_seed))?;
            vec![
                ModelScore { model: "linear_regression".into(), score: r2_normalized(&lin.predict(x_test.view()), truth)?, degenerate: false },
                ModelScore { model: "decision_tree".into(), score: r2_normalized(&tree.predict(x_test.view()), truth)?, degenerate: false },
                ModelScore { model: "mlp".into(), score: r2_normalized(&mlp.predict(x_test.view())?, truth)?, degenerate: mlp.diverged },
            ]
        }
        _ => unreachable!("train and test share a schema"),
    };
    let score = models.iter().map(|m| m.score).sum::<f64>() / models.len() as f64;
    let task = if y_train.is_classification() { Task::Classification } else { Task::Regression };
    Ok(UtilityScore { target: name, task, score, models })
}

/// Utility for the schema's designated target.
pub fn ml_efficacy<R: Rng>(synth: &Table, test: &Table, config: &UtilityConfig, rng: &mut R) -> Result<UtilityScore> {
    let target = test
        .schema()
        .target_index()
        .ok_or_else(|| Error::invalid("ml_efficacy needs a schema target"))?;
    utility_for_target(synth, test, target, config, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionWise {
    /// Mean over `columns`.
    pub score: f64,
    pub columns: Vec<UtilityScore>,
}

/// Utility averaged over every column taken in turn as the target.
pub fn dimension_wise_prediction<R: Rng>(synth: &Table, test: &Table, config: &UtilityConfig, rng: &mut R) -> Result<DimensionWise> {
    if test.n_cols() < 2 {
        return Err(Error::invalid("dimension-wise prediction needs at least two columns"));
    }
    let seeds: Vec<u64> = (0..test.n_cols()).map(|_| rng.random()).collect();
    let columns = seeds
        .iter()
        .enumerate()
        .map(|(j, &s)| utility_for_target(synth, test, j, config, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect::<Result<Vec<_>>>()?;
    let score = columns.iter().map(|c| c.score).sum::<f64>() / columns.len() as f64;
    Ok(DimensionWise { score, columns })
}
