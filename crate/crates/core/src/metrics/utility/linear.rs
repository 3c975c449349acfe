use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, largest_eigenvalue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Inverse L2 strength; the penalty is ‖W‖² / (2·C·n) on the mean loss.
    pub c: f64,
    pub max_iter: usize,
    /// Stop once the max-norm of the gradient falls below this.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { c: 1.0, max_iter: 2000, tol: 1e-6 }
    }
}

fn with_bias(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::ones((x.nrows(), x.ncols() + 1));
    out.slice_mut(s![.., ..x.ncols()]).assign(&x);
    out
}

/// Multinomial logistic regression with an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    /// (features + 1) × classes; the last row is the intercept.
    pub weights: Array2<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticRegression {
    /// Accelerated gradient descent with step 1/L and function-value restart.
    pub fn fit(x: ArrayView2<'_, f64>, codes: &[u32], n_classes: usize, config: &LogRegConfig) -> Result<Self> {
        if x.nrows() != codes.len() {
            return Err(Error::shape(x.nrows(), codes.len()));
        }
        if x.nrows() == 0 || n_classes < 2 {
            return Err(Error::invalid("logistic regression needs rows and at least two classes"));
        }
        let xb = with_bias(x);
        let n = xb.nrows() as f64;
        let p = xb.ncols();
        let mut y = Array2::<f64>::zeros((xb.nrows(), n_classes));
        for (i, &c) in codes.iter().enumerate() {
            y[[i, c as usize]] = 1.0;
        }
        let reg = 1.0 / (config.c * n);
        let gram = xb.t().dot(&xb) / n;
        let lipschitz = 0.5 * largest_eigenvalue(&gram) + reg;
        let step = 1.0 / lipschitz;

        let objective = |w: &Array2<f64>| -> (f64, Array2<f64>) {
            let logits = xb.dot(w);
            let mut loss = 0.0;
            let mut resid = Array2::<f64>::zeros(logits.raw_dim());
            for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
                loss += lse - row[codes[i] as usize];
                for k in 0..n_classes {
                    resid[[i, k]] = (row[k] - lse).exp() - y[[i, k]];
                }
            }
            let mut grad = xb.t().dot(&resid) / n;
            let wr = w.slice(s![..p - 1, ..]);
            let penalty = 0.5 * reg * wr.iter().map(|v| v * v).sum::<f64>();
            grad.slice_mut(s![..p - 1, ..]).scaled_add(reg, &wr);
            (loss / n + penalty, grad)
        };

        let mut w = Array2::<f64>::zeros((p, n_classes));
        let mut v = w.clone();
        let mut t = 1.0f64;
        let (mut f_prev, _) = objective(&w);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < config.max_iter {
            iterations += 1;
            let (_, gv) = objective(&v);
            let next = &v - &(gv * step);
            let (f_next, g_next) = objective(&next);
            if g_next.iter().fold(0.0f64, |m, g| m.max(g.abs())) < config.tol {
                w = next;
                converged = true;
                break;
            }
            if f_next > f_prev {
                // restart momentum from the last accepted point
                t = 1.0;
                v = w.clone();
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = &next + &((&next - &w) * ((t - 1.0) / t_next));
            w = next;
            t = t_next;
            f_prev = f_next;
        }
        Ok(LogisticRegression { weights: w, iterations, converged })
    }

    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        with_bias(x).dot(&self.weights)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<u32> {
        self.decision(x).axis_iter(Axis(0)).map(|r| crate::util::argmax(r) as u32).collect()
    }
}

/// Ordinary least squares with intercept, solved from the normal equations.
///
/// A ridge of 1e-10 times the mean diagonal keeps collinear designs (one-hot
/// blocks next to the intercept) solvable.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub coef: Array1<f64>,
}

impl LinearRegression {
    pub fn fit(x: ArrayView2<'_, f64>, y: &[f64]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::shape(x.nrows(), y.len()));
        }
        if y.is_empty() {
            return Err(Error::invalid("linear regression on zero rows"));
        }
        let xb = with_bias(x);
        let p = xb.ncols();
        let gram = xb.t().dot(&xb);
        let rhs = xb.t().dot(&Array1::from(y.to_vec()));
        let scale = (0..p).map(|i| gram[[i, i]]).sum::<f64>() / p as f64;
        let mut ridge = 1e-10 * scale.max(1e-300);
        for _ in 0..12 {
            let mut a = gram.clone();
            for i in 0..p {
                a[[i, i]] += ridge;
            }
            if let Some(coef) = cholesky_solve(&a, &rhs) {
                if coef.iter().all(|c| c.is_finite()) {
                    return Ok(LinearRegression { coef });
                }
            }
            ridge *= 100.0;
        }
        Err(Error::invalid("normal equations could not be solved"))
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        with_bias(x).dot(&self.coef).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn separable_data_is_fit_exactly() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [3.0, 3.0], [3.0, 4.0], [4.0, 3.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let m = LogisticRegression::fit(x.view(), &y, 2, &LogRegConfig::default()).unwrap();
        assert_eq!(m.predict(x.view()), y);
        assert!(m.converged);
    }

    #[test]
    fn symmetric_gaussians_split_at_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (Normal::new(-1.0, 1.0).unwrap(), Normal::new(1.0, 1.0).unwrap());
        let n = 4000;
        let mut x = Array2::zeros((n, 1));
        let mut y = vec![0u32; n];
        for i in 0..n {
            if i % 2 == 0 {
                x[[i, 0]] = a.sample(&mut rng);
            } else {
                x[[i, 0]] = b.sample(&mut rng);
                y[i] = 1;
            }
        }
        let m = LogisticRegression::fit(x.view(), &y, 2, &LogRegConfig::default()).unwrap();
        let w = &m.weights;
        let boundary = -(w[[1, 1]] - w[[1, 0]]) / (w[[0, 1]] - w[[0, 0]]);
        assert!(boundary.abs() < 0.1, "boundary at {boundary}");
    }

    #[test]
    fn linear_regression_recovers_plane_with_collinear_one_hot() {
        // y = 2·x + 1 + (0 or 3 by category); one-hot columns sum to the intercept.
        let x = array![[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [2.0, 0.0, 1.0], [3.0, 0.0, 1.0], [4.0, 1.0, 0.0]];
        let y = [1.0, 3.0, 8.0, 10.0, 9.0];
        let m = LinearRegression::fit(x.view(), &y).unwrap();
        for (p, t) in m.predict(x.view()).iter().zip(y) {
            assert!((p - t).abs() < 1e-6, "{p} vs {t}");
        }
    }
}
