use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// Leaky ReLU with slope [`LEAKY_SLOPE`].
    LeakyRelu,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            _ => 0.0,
        }
    }

    /// Piecewise-linear activations have a zero second derivative a.e.
    pub fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Identity => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::LeakyRelu,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Identity,
            _ => return None,
        })
    }
}

/// Layer widths and nonlinearities of a dense stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: usize,
    pub layers: Vec<(usize, Activation)>,
}

impl NetSpec {
    pub fn new(input: usize, hidden: &[usize], hidden_activation: Activation, output: usize, output_activation: Activation) -> Self {
        let mut layers: Vec<(usize, Activation)> = hidden.iter().map(|&w| (w, hidden_activation)).collect();
        layers.push((output, output_activation));
        NetSpec { input, layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `inputs × outputs`, applied as `x · W + b`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer (the first is the batch itself).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Gradients (or any parameter-shaped quantity) for an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Grads {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().for_each(|w| *w *= k);
        self.biases.iter_mut().for_each(|b| *b *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Flattened in layer order, weights (row-major) before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

pub struct PenaltyOutput {
    pub value: f64,
    pub grads: Grads,
    /// Interpolation coefficient drawn for each row, in `[0, 1)`.
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    /// PyTorch-style initialization: weights and biases uniform in
    /// `±1/sqrt(fan_in)`.
    pub fn new<R: Rng>(spec: &NetSpec, rng: &mut R) -> Self {
        let mut fan_in = spec.input;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for &(width, activation) in &spec.layers {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_in, width), || rng.random_range(-bound..bound));
            let bias = Array1::from_shape_simple_fn(width, || rng.random_range(-bound..bound));
            layers.push(Dense { weight, bias, activation });
            fan_in = width;
        }
        Mlp { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::shape(pair[0].weight.ncols(), pair[1].weight.nrows()));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weight.ncols() {
                return Err(Error::shape(l.weight.ncols(), l.bias.len()));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn spec(&self) -> NetSpec {
        NetSpec {
            input: self.input_width(),
            layers: self.layers.iter().map(|l| (l.weight.ncols(), l.activation)).collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").weight.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|x| x.is_finite()) && l.bias.iter().all(|x| x.is_finite()))
    }

    /// Parameters flattened in the same order as [`Grads::to_flat`].
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(self.num_params(), flat.len()));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().expect("length checked"));
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::shape(format!("{} input columns", self.input_width()), x.ncols()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite network input"));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = a.dot(&layer.weight) + &layer.bias;
            let act = layer.activation;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok((a, ForwardCache { inputs, pre }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            let act = layer.activation;
            a = (a.dot(&layer.weight) + &layer.bias).mapv(|v| act.apply(v));
        }
        Ok(a)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.pre.len() != self.layers.len()
            || cache.pre.iter().zip(&self.layers).any(|(z, l)| z.ncols() != l.weight.ncols())
        {
            return Err(Error::invalid("forward cache does not belong to this network"));
        }
        Ok(())
    }

    /// Reverse-mode pass. `output_grad` is ∂loss/∂output; returns parameter
    /// gradients and ∂loss/∂input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<'_, f64>) -> Result<(Grads, Array2<f64>)> {
        self.check_cache(cache)?;
        let last = self.layers.len() - 1;
        if output_grad.dim() != cache.pre[last].dim() {
            return Err(Error::shape(format!("{:?}", cache.pre[last].dim()), format!("{:?}", output_grad.dim())));
        }
        let mut grads = Grads::zeros_like(self);
        let mut upstream = output_grad.to_owned();
        for l in (0..=last).rev() {
            let act = self.layers[l].activation;
            // dz = upstream ⊙ σ'(z)
            Zip::from(&mut upstream).and(&cache.pre[l]).for_each(|u, &z| *u *= act.derivative(z));
            grads.weights[l] = cache.inputs[l].t().dot(&upstream);
            grads.biases[l] = upstream.sum_axis(Axis(0));
            upstream = upstream.dot(&self.layers[l].weight.t());
        }
        Ok((grads, upstream))
    }

    /// Per-row gradient of a scalar output with respect to the input row.
    pub fn input_gradient(&self, cache: &ForwardCache) -> Result<Array2<f64>> {
        if self.output_width() != 1 {
            return Err(Error::invalid(format!(
                "input gradient needs a scalar output, network has {}",
                self.output_width()
            )));
        }
        let ones = Array2::ones((cache.batch_size(), 1));
        Ok(self.backward(cache, ones.view())?.1)
    }

    /// WGAN-GP penalty on random interpolates of paired real/fake rows.
    pub fn gradient_penalty<R: Rng>(
        &self,
        real: ArrayView2<'_, f64>,
        fake: ArrayView2<'_, f64>,
        rng: &mut R,
        lambda: f64,
    ) -> Result<PenaltyOutput> {
        if real.dim() != fake.dim() {
            return Err(Error::shape(format!("{:?}", real.dim()), format!("{:?}", fake.dim())));
        }
        let epsilon: Vec<f64> = (0..real.nrows()).map(|_| rng.random::<f64>()).collect();
        let mut interp = fake.to_owned();
        for (r, mut row) in interp.rows_mut().into_iter().enumerate() {
            let e = epsilon[r];
            Zip::from(&mut row).and(real.row(r)).for_each(|f, &x| *f = e * x + (1.0 - e) * *f);
        }
        let (value, grads) = self.penalty_at(interp.view(), lambda)?;
        Ok(PenaltyOutput { value, grads, epsilon })
    }

    /// `λ · mean_r (‖∇ₓ D(x_r)‖₂ − 1)²` at fixed points and its exact gradient
    /// with respect to the parameters (differentiating through the
    /// input-gradient computation).
    pub fn penalty_at(&self, points: ArrayView2<'_, f64>, lambda: f64) -> Result<(f64, Grads)> {
        if lambda < 0.0 {
            return Err(Error::invalid("gradient penalty weight must be non-negative"));
        }
        if self.output_width() != 1 {
            return Err(Error::invalid("gradient penalty needs a scalar-output critic"));
        }
        let (_, cache) = self.forward(points)?;
        let n_layers = self.layers.len();
        let batch = points.nrows();

        // Input-gradient chain with unit upstream:
        //   e_top = σ'(z_top);  h_l = e_{l+1} W_{l+1}ᵀ;  e_l = h_l ⊙ σ'(z_l);  g = e_0 W_0ᵀ
        let slopes: Vec<Array2<f64>> = cache
            .pre
            .iter()
            .zip(&self.layers)
            .map(|(z, l)| {
                let act = l.activation;
                z.mapv(|v| act.derivative(v))
            })
            .collect();
        let mut e: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        let mut h: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        e[n_layers - 1] = slopes[n_layers - 1].clone();
        for l in (0..n_layers - 1).rev() {
            h[l] = e[l + 1].dot(&self.layers[l + 1].weight.t());
            e[l] = &h[l] * &slopes[l];
        }
        let g = e[0].dot(&self.layers[0].weight.t());

        let mut value = 0.0;
        let mut g_bar = g;
        for mut row in g_bar.rows_mut() {
            let norm = row.dot(&row).sqrt();
            value += (norm - 1.0).powi(2);
            let coef = if norm > 0.0 { 2.0 * lambda * (norm - 1.0) / (norm * batch as f64) } else { 0.0 };
            row *= coef;
        }
        value *= lambda / batch as f64;

        let mut grads = Grads::zeros_like(self);
        // Reverse through g = e_0 W_0ᵀ.
        grads.weights[0] += &g_bar.t().dot(&e[0]);
        let mut e_bar = g_bar.dot(&self.layers[0].weight);
        let mut injected: Vec<Option<Array2<f64>>> = vec![None; n_layers];
        for l in 0..n_layers {
            let top = l == n_layers - 1;
            let act = self.layers[l].activation;
            if !act.is_piecewise_linear() {
                // ∂/∂z of σ'(z): second-order contribution fed into the forward graph.
                let s_bar = if top { e_bar.clone() } else { &e_bar * &h[l] };
                let mut z_bar = s_bar;
                Zip::from(&mut z_bar).and(&cache.pre[l]).for_each(|v, &z| *v *= act.second_derivative(z));
                injected[l] = Some(z_bar);
            }
            if top {
                break;
            }
            let h_bar = &e_bar * &slopes[l];
            grads.weights[l + 1] += &h_bar.t().dot(&e[l + 1]);
            e_bar = h_bar.dot(&self.layers[l + 1].weight);
        }

        if injected.iter().any(Option::is_some) {
            let mut carry: Option<Array2<f64>> = None;
            for l in (0..n_layers).rev() {
                let z_bar = match (carry.take(), injected[l].take()) {
                    (Some(c), Some(i)) => c + i,
                    (Some(c), None) => c,
                    (None, Some(i)) => i,
                    (None, None) => continue,
                };
                grads.weights[l] += &cache.inputs[l].t().dot(&z_bar);
                grads.biases[l] += &z_bar.sum_axis(Axis(0));
                if l > 0 {
                    let mut up = z_bar.dot(&self.layers[l].weight.t());
                    up *= &slopes[l - 1];
                    carry = Some(up);
                }
            }
        }
        Ok((value, grads))
    }
}
