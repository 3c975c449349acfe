//! Generator loss terms: conditional cross-entropy and moment matching.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::cond::CondBatch;
use super::pca::PcaTransform;
use crate::error::{Error, Result};

/// Per-dimension mean and population standard deviation (divisor `n`).
pub fn batch_moments(x: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let var = (&x - &mean).mapv(|v| v * v).sum_axis(Axis(0)) / n;
    (mean, var.mapv(f64::sqrt))
}

/// Feature map applied before matching moments.
#[derive(Debug, Clone, Copy)]
pub enum Projection<'a> {
    Identity,
    Pca(&'a PcaTransform),
}

impl Projection<'_> {
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Projection::Identity => x.to_owned(),
            Projection::Pca(p) => p.project(x),
        }
    }

    /// Pulls a gradient in projected space back to the input space.
    fn pull_back(&self, g: Array2<f64>) -> Array2<f64> {
        match self {
            Projection::Identity => g,
            Projection::Pca(p) => g.dot(&p.components.t()),
        }
    }
}

/// Moments of the real batch in projected space, computed once per step.
#[derive(Debug, Clone)]
pub struct MomentTarget {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl MomentTarget {
    pub fn new(real: ArrayView2<'_, f64>, f: Projection<'_>) -> Self {
        let (mean, std) = batch_moments(f.apply(real).view());
        MomentTarget { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MargLoss {
    pub mean_term: f64,
    pub std_term: f64,
}

impl MargLoss {
    pub fn total(&self) -> f64 {
        self.mean_term + self.std_term
    }
}

/// `‖mean f(real) − mean f(fake)‖₂ + ‖std f(real) − std f(fake)‖₂`.
pub fn marg_loss(real: ArrayView2<'_, f64>, fake: ArrayView2<'_, f64>, f: Projection<'_>) -> Result<f64> {
    if real.ncols() != fake.ncols() {
        return Err(Error::shape(real.ncols(), fake.ncols()));
    }
    Ok(marg_loss_with_grad(&MomentTarget::new(real, f), fake, f)?.0.total())
}

/// Loss against precomputed real moments, and its gradient with respect to
/// the fake rows.
pub fn marg_loss_with_grad(
    target: &MomentTarget,
    fake: ArrayView2<'_, f64>,
    f: Projection<'_>,
) -> Result<(MargLoss, Array2<f64>)> {
    if target.mean.len() != fake.ncols() {
        return Err(Error::shape(target.mean.len(), fake.ncols()));
    }
    let n = fake.nrows() as f64;
    let projected = f.apply(fake);
    let (mean, std) = batch_moments(projected.view());
    let dmean = &target.mean - &mean;
    let dstd = &target.std - &std;
    let mean_term = dmean.dot(&dmean).sqrt();
    let std_term = dstd.dot(&dstd).sqrt();

    let mut grad = Array2::zeros(projected.raw_dim());
    if mean_term > 0.0 {
        // ∂‖a − m‖/∂m = −(a − m)/‖a − m‖, and ∂m/∂x_r = 1/n
        let g = dmean.mapv(|v| -v / (mean_term * n));
        grad += &g;
    }
    if std_term > 0.0 {
        let coef = dstd.mapv(|v| -v / std_term);
        let centered = &projected - &mean;
        for (j, mut col) in grad.columns_mut().into_iter().enumerate() {
            if std[j] > 0.0 {
                let k = coef[j] / (n * std[j]);
                col.zip_mut_with(&centered.column(j), |g, &c| *g += k * c);
            }
        }
    }
    Ok((MargLoss { mean_term, std_term }, f.pull_back(grad)))
}

/// Mean cross-entropy between the probabilities a row assigns to its
/// conditioned column's span and the conditioned category.
///
/// `probs` holds per-span probability rows laid out like the encoded
/// vector; `spans[j]` is the encoded range of the sampler's `j`-th
/// categorical column.
pub fn cond_loss(probs: ArrayView2<'_, f64>, spans: &[Range<usize>], cond: &CondBatch) -> f64 {
    if cond.columns.is_empty() {
        return 0.0;
    }
    let total: f64 = cond
        .columns
        .iter()
        .zip(&cond.categories)
        .enumerate()
        .map(|(r, (&j, &c))| -probs[[r, spans[j].start + c]].max(1e-300).ln())
        .sum();
    total / cond.columns.len() as f64
}

/// Gradient of [`cond_loss`] with respect to the logits when each span's
/// probabilities are `softmax(logits)`: `(p − onehot) / n` on the
/// conditioned span, zero elsewhere.
pub fn cond_loss_logit_grad(probs: ArrayView2<'_, f64>, spans: &[Range<usize>], cond: &CondBatch) -> Array2<f64> {
    let mut grad = Array2::zeros(probs.raw_dim());
    let n = cond.columns.len() as f64;
    for (r, (&j, &c)) in cond.columns.iter().zip(&cond.categories).enumerate() {
        let span = spans[j].clone();
        for k in span.clone() {
            grad[[r, k]] = probs[[r, k]] / n;
        }
        grad[[r, span.start + c]] -= 1.0 / n;
    }
    grad
}
