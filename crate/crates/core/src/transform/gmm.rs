//! One-dimensional Gaussian mixtures fitted by EM, used for mode-specific
//! normalization of numerical columns.
//!
//! The component count is chosen by BIC over `1..=max_modes`; components of
//! the selected fit whose weight falls below `weight_floor` are deactivated
//! and never used for encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Std assigned to the single mode of a constant column.
pub const DEGENERATE_STD: f64 = 1e-6;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub max_modes: usize,
    pub weight_floor: f64,
    pub max_iter: usize,
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig { max_modes: 10, weight_floor: 0.005, max_iter: 500, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub active: Vec<bool>,
    /// Set when the column was constant and got the single-mode fallback.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood after every EM iteration of the selected fit.
    pub log_likelihood_trace: Vec<f64>,
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Indices of active components in ascending order.
    pub fn active_modes(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&k| self.active[k]).collect()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    fn log_density(&self, k: usize, x: f64) -> f64 {
        let z = (x - self.means[k]) / self.stds[k];
        -0.5 * z * z - self.stds[k].ln() - LN_SQRT_2PI
    }

    /// Posterior responsibilities over the active modes (same order as
    /// [`active_modes`](Self::active_modes)).
    pub fn responsibilities(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = self
            .active_modes()
            .into_iter()
            .map(|k| self.weights[k].ln() + self.log_density(k, x))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    /// Mean log-likelihood of `values` under the full mixture.
    pub fn mean_log_likelihood(&self, values: &[f64]) -> f64 {
        let k = self.n_components();
        let mut logs = vec![0.0; k];
        values
            .iter()
            .map(|&x| {
                for (j, l) in logs.iter_mut().enumerate() {
                    *l = self.weights[j].ln() + self.log_density(j, x);
                }
                log_sum_exp(&logs)
            })
            .sum::<f64>()
            / values.len() as f64
    }

    /// Range of values that decode without clipping, per active mode.
    pub fn decodable_range(&self) -> (f64, f64) {
        self.active_modes().into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            (lo.min(self.means[k] - 4.0 * self.stds[k]), hi.max(self.means[k] + 4.0 * self.stds[k]))
        })
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Fits a mixture to `values`, selecting the mode count by BIC.
pub fn fit_gmm<R: Rng>(values: &[f64], config: &GmmConfig, rng: &mut R) -> Result<GmmFit> {
    if values.is_empty() {
        return Err(Error::invalid("cannot fit a mixture to an empty column"));
    }
    if config.max_modes == 0 {
        return Err(Error::invalid("max_modes must be at least 1"));
    }
    if let Some(x) = values.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {x} in column")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let distinct = sorted.len();
    if distinct < 2 {
        return Ok(GmmFit {
            model: GmmModel {
                weights: vec![1.0],
                means: vec![values[0]],
                stds: vec![DEGENERATE_STD],
                active: vec![true],
                degenerate: true,
            },
            log_likelihood_trace: Vec::new(),
        });
    }

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let var_floor = (1e-6 * var).max(1e-300);

    let max_k = config.max_modes.min(distinct);
    let mut best: Option<(f64, GmmFit)> = None;
    for k in 1..=max_k {
        let fit = em(values, k, var_floor, config, rng);
        let ll = fit.log_likelihood_trace.last().copied().unwrap_or(f64::NEG_INFINITY) * n;
        let params = (3 * k - 1) as f64;
        let bic = -2.0 * ll + params * n.ln();
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, fit));
        }
    }
    let (_, mut fit) = best.expect("max_k >= 1");
    let model = &mut fit.model;
    model.active = model.weights.iter().map(|&w| w >= config.weight_floor).collect();
    if model.n_active() == 0 {
        let heaviest = (0..model.weights.len())
            .max_by(|&a, &b| model.weights[a].total_cmp(&model.weights[b]))
            .expect("non-empty");
        model.active[heaviest] = true;
    }
    Ok(fit)
}

/// k-means++ seeding followed by a few Lloyd steps.
fn init_means<R: Rng>(values: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centers = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = values.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            values[pick]
        } else {
            values[rng.random_range(0..values.len())]
        };
        centers.push(next);
        for (d, x) in d2.iter_mut().zip(values) {
            *d = d.min((x - next).powi(2));
        }
    }
    for _ in 0..10 {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for &x in values {
            let j = nearest(&centers, x);
            sums[j] += x;
            counts[j] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j] / counts[j] as f64;
            }
        }
    }
    centers
}

fn nearest(centers: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (j, c) in centers.iter().enumerate() {
        if (x - c).abs() < (x - centers[best]).abs() {
            best = j;
        }
    }
    best
}

fn em<R: Rng>(values: &[f64], k: usize, var_floor: f64, config: &GmmConfig, rng: &mut R) -> GmmFit {
    let n = values.len();
    let centers = init_means(values, k, rng);

    // Initial M-step from hard k-means assignments.
    let mut resp = vec![0.0; n * k];
    for (i, &x) in values.iter().enumerate() {
        resp[i * k + nearest(&centers, x)] = 1.0;
    }
    let mut model = GmmModel {
        weights: vec![1.0 / k as f64; k],
        means: centers,
        stds: vec![1.0; k],
        active: vec![true; k],
        degenerate: false,
    };
    m_step(values, &resp, var_floor, &mut model);

    let mut trace = Vec::new();
    let mut logs = vec![0.0; k];
    for _ in 0..config.max_iter {
        // E-step
        let mut ll = 0.0;
        let offset: Vec<f64> = (0..k)
            .map(|j| {
                if model.weights[j] > 0.0 {
                    model.weights[j].ln() - model.stds[j].ln() - LN_SQRT_2PI
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let inv: Vec<f64> = model.stds.iter().map(|s| 1.0 / s).collect();
        for (i, &x) in values.iter().enumerate() {
            for (j, l) in logs.iter_mut().enumerate() {
                let z = (x - model.means[j]) * inv[j];
                *l = offset[j] - 0.5 * z * z;
            }
            let lse = log_sum_exp(&logs);
            ll += lse;
            for j in 0..k {
                resp[i * k + j] = (logs[j] - lse).exp();
            }
        }
        let ll = ll / n as f64;
        let converged = trace.last().is_some_and(|prev: &f64| ll - prev < config.tol);
        trace.push(ll);
        if converged {
            break;
        }
        m_step(values, &resp, var_floor, &mut model);
    }
    GmmFit { model, log_likelihood_trace: trace }
}

fn m_step(values: &[f64], resp: &[f64], var_floor: f64, model: &mut GmmModel) {
    let k = model.weights.len();
    let n = values.len();
    for j in 0..k {
        let mut nk = 0.0;
        let mut sx = 0.0;
        for (i, &x) in values.iter().enumerate() {
            let r = resp[i * k + j];
            nk += r;
            sx += r * x;
        }
        if nk <= 0.0 {
            model.weights[j] = 0.0;
            continue;
        }
        let mu = sx / nk;
        let mut sv = 0.0;
        for (i, &x) in values.iter().enumerate() {
            sv += resp[i * k + j] * (x - mu).powi(2);
        }
        model.weights[j] = nk / n as f64;
        model.means[j] = mu;
        model.stds[j] = (sv / nk).max(var_floor).sqrt();
    }
    let total: f64 = model.weights.iter().sum();
    for w in &mut model.weights {
        *w /= total;
    }
}
