use serde::{Deserialize, Serialize};

use super::mlp::{Grads, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 2e-4, beta1: 0.5, beta2: 0.9, eps: 1e-8 }
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Grads,
    v: Grads,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        AdamState { config, step: 0, m: Grads::zeros_like(net), v: Grads::zeros_like(net) }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) -> Result<()> {
        if grads.weights.len() != net.layers().len()
            || grads.weights.iter().zip(net.layers()).any(|(g, l)| g.dim() != l.weight.dim())
        {
            return Err(Error::invalid("gradient shapes do not match the network"));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weight)
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
