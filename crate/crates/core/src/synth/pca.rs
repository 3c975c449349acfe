use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{covariance, symmetric_eigen};

/// Eigenvalues at or below `RANK_TOL * max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Full-rank rotation onto the principal axes: `f(x) = Wᵀ(x − μ)`, with no
/// dimensionality reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Array1<f64>,
    /// Columns are unit eigenvectors of the sample covariance, in
    /// descending eigenvalue order.
    pub components: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues above `RANK_TOL * max`.
    pub rank: usize,
}

impl PcaTransform {
    /// `μ = 0`, `W = I`: moment matching in the raw encoded space.
    pub fn identity(dim: usize) -> Self {
        PcaTransform { mean: Array1::zeros(dim), components: Array2::eye(dim), eigenvalues: vec![1.0; dim], rank: dim }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean).dot(&self.components)
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.dim()
    }
}

pub fn fit_pca(data: ArrayView2<'_, f64>) -> Result<PcaTransform> {
    if data.nrows() < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {}", data.nrows())));
    }
    let (mean, cov) = covariance(data);
    let (eigenvalues, mut components) = symmetric_eigen(&cov);
    for mut col in components.columns_mut() {
        let mut lead = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
    let max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let rank = eigenvalues.iter().filter(|&&l| l > RANK_TOL * max).count();
    Ok(PcaTransform { mean, components, eigenvalues, rank })
}
