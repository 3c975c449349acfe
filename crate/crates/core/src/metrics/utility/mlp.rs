use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::Targets;
use crate::error::{Error, Result};
use crate::nn::{softmax_rows, Activation, AdamConfig, AdamState, Mlp, NetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: 100, epochs: 20, batch_size: 200, lr: 1e-3 }
    }
}

/// One-hidden-layer ReLU network: softmax cross-entropy for classes, squared
/// error on an internally standardized target for values.
#[derive(Debug, Clone)]
pub struct MlpPredictor {
    net: Mlp,
    classify: bool,
    /// Target `(mean, std)` for regression.
    target_scale: (f64, f64),
    /// Training went non-finite; predictions fall back to a constant.
    pub diverged: bool,
    fallback: f64,
}

impl MlpPredictor {
    pub fn fit<R: Rng>(x: ArrayView2<'_, f64>, y: &Targets, config: &MlpConfig, rng: &mut R) -> Result<Self> {
        let n = x.nrows();
        if n != y.len() {
            return Err(Error::shape(n, y.len()));
        }
        if n == 0 || config.batch_size == 0 {
            return Err(Error::invalid("MLP needs rows and a positive batch size"));
        }
        let (out, classify) = match y {
            Targets::Classes { n_classes, .. } => (*n_classes, true),
            Targets::Values(_) => (1, false),
        };
        let spec = NetSpec::new(x.ncols(), &[config.hidden], Activation::Relu, out, Activation::Identity);
        let mut net = Mlp::new(&spec, rng);
        let adam_cfg = AdamConfig { lr: config.lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut adam = AdamState::new(&net, adam_cfg);

        let (target, target_scale, fallback) = match y {
            Targets::Classes { codes, n_classes } => {
                let mut t = Array2::<f64>::zeros((n, *n_classes));
                for (i, &c) in codes.iter().enumerate() {
                    t[[i, c as usize]] = 1.0;
                }
                let counts = crate::data::category_counts(codes, *n_classes);
                let majority = (0..*n_classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
                (t, (0.0, 1.0), majority as f64)
            }
            Targets::Values(v) => {
                let mean = v.iter().sum::<f64>() / n as f64;
                let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                let sd = if sd > 0.0 { sd } else { 1.0 };
                let t = Array2::from_shape_fn((n, 1), |(i, _)| (v[i] - mean) / sd);
                (t, (mean, sd), mean)
            }
        };

        let batch = config.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut diverged = false;
        'epochs: for _ in 0..config.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(batch) {
                let xb = x.select(Axis(0), chunk);
                let tb = target.select(Axis(0), chunk);
                let (o, cache) = net.forward(xb.view())?;
                let m = chunk.len() as f64;
                let grad = if classify { (softmax_rows(o.view()) - &tb) / m } else { (o - &tb) / m };
                let (g, _) = net.backward(&cache, grad.view())?;
                if !g.is_finite() {
                    diverged = true;
                    break 'epochs;
                }
                adam.step(&mut net, &g)?;
            }
        }
        diverged |= !net.is_finite();
        Ok(MlpPredictor { net, classify, target_scale, diverged, fallback })
    }

    /// Class indices as `f64` for classifiers, values otherwise.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if self.diverged {
            return Ok(vec![self.fallback; x.nrows()]);
        }
        let o = self.net.predict(x)?;
        Ok(if self.classify {
            o.axis_iter(Axis(0)).map(|r| crate::util::argmax(r) as f64).collect()
        } else {
            let (mean, sd) = self.target_scale;
            o.column(0).iter().map(|v| v * sd + mean).collect()
        })
    }
}
