use std::ops::Range;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cond::{CondBatch, CondSampler, RowIndex};
use super::loss::{cond_loss, cond_loss_logit_grad, marg_loss_with_grad, MomentTarget, Projection};
use super::pca::{fit_pca, PcaTransform};
use crate::data::Table;
use crate::error::{Error, Result};
use crate::nn::{gumbel_softmax, softmax_backward, softmax_rows, Activation, AdamConfig, AdamState, Grads, Mlp, NetSpec};
use crate::transform::{DataTransformer, EncodedLayout, GmmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Baseline: no moment matching.
    #[serde(rename = "ctgan")]
    Ctgan,
    /// Moment matching on PCA-decorrelated features.
    #[serde(rename = "margctgan")]
    MargCtgan,
    /// Moment matching on the raw encoded features.
    #[serde(rename = "ctgan-raw")]
    CtganRaw,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Ctgan => "ctgan",
            Variant::MargCtgan => "margctgan",
            Variant::CtganRaw => "ctgan-raw",
        }
    }

    pub fn uses_moment_matching(&self) -> bool {
        !matches!(self, Variant::Ctgan)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ctgan" => Ok(Variant::Ctgan),
            "margctgan" => Ok(Variant::MargCtgan),
            "ctgan-raw" => Ok(Variant::CtganRaw),
            _ => Err(Error::invalid(format!("unknown variant `{s}` (expected ctgan, margctgan or ctgan-raw)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    /// Gradient penalty weight.
    pub lambda: f64,
    pub critic_steps: usize,
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub generator_adam: AdamConfig,
    pub critic_adam: AdamConfig,
    /// Gumbel-softmax temperature.
    pub tau: f64,
    pub gmm: GmmConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::MargCtgan,
            epochs: 300,
            batch_size: 500,
            lambda: 10.0,
            critic_steps: 1,
            latent_dim: 128,
            generator_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            generator_adam: AdamConfig::default(),
            critic_adam: AdamConfig::default(),
            tau: 0.2,
            gmm: GmmConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return Err(Error::invalid("batch size must be positive and even"));
        }
        if self.critic_steps == 0 || self.latent_dim == 0 {
            return Err(Error::invalid("critic steps and latent width must be positive"));
        }
        if !(self.tau > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::invalid("tau must be positive and lambda non-negative"));
        }
        Ok(())
    }
}

/// Per-epoch averages of the training losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Critic objective: fake score − real score + penalty.
    pub critic_loss: f64,
    /// Critic's Wasserstein estimate: real score − fake score.
    pub wasserstein: f64,
    pub penalty: f64,
    /// −(critic score on fakes) + cond + marg.
    pub generator_loss: f64,
    pub cond_loss: f64,
    pub marg_loss: f64,
}

/// A trained generator with everything needed to sample tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthModel {
    pub config: TrainConfig,
    pub transformer: DataTransformer,
    pub cond: CondSampler,
    /// Moment-matching feature map; `None` for ctgan.
    pub pca: Option<PcaTransform>,
    pub generator: Mlp,
    pub critic: Mlp,
    pub trace: Vec<EpochStats>,
    pub diagnostics: Vec<String>,
}

/// Generator output activations: tanh on alpha slots, Gumbel-softmax on
/// every one-hot span.
struct Heads {
    alpha: Vec<usize>,
    spans: Vec<Range<usize>>,
}

struct HeadOutput {
    value: Array2<f64>,
    softs: Vec<Array2<f64>>,
}

impl Heads {
    fn new(layout: &EncodedLayout) -> Self {
        Heads { alpha: layout.alpha_slots(), spans: layout.onehot_spans() }
    }

    fn apply<R: Rng>(&self, raw: &Array2<f64>, tau: f64, rng: &mut R, hard: bool) -> Result<HeadOutput> {
        let mut value = raw.clone();
        for &a in &self.alpha {
            value.column_mut(a).mapv_inplace(f64::tanh);
        }
        let mut softs = Vec::with_capacity(self.spans.len());
        for span in &self.spans {
            let g = gumbel_softmax(raw.slice(s![.., span.clone()]), tau, rng, hard)?;
            value.slice_mut(s![.., span.clone()]).assign(&g.value);
            softs.push(g.soft);
        }
        Ok(HeadOutput { value, softs })
    }

    fn backward(&self, out: &HeadOutput, upstream: &Array2<f64>, tau: f64) -> Array2<f64> {
        let mut grad = Array2::zeros(upstream.raw_dim());
        for &a in &self.alpha {
            let mut col = grad.column_mut(a);
            col.assign(&upstream.column(a));
            col.zip_mut_with(&out.value.column(a), |g, &t| *g *= 1.0 - t * t);
        }
        for (span, soft) in self.spans.iter().zip(&out.softs) {
            let g = softmax_backward(soft.view(), upstream.slice(s![.., span.clone()]), tau);
            grad.slice_mut(s![.., span.clone()]).assign(&g);
        }
        grad
    }
}

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn hstack(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("equal row counts")
}

/// Extra knobs for experiments on the training loop itself.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Replaces the fitted PCA map for variants that match moments.
    pub projection_override: Option<PcaTransform>,
}

pub fn train(table: &Table, config: &TrainConfig) -> Result<SynthModel> {
    train_with(table, config, TrainOptions::default())
}

pub fn train_with(table: &Table, config: &TrainConfig, options: TrainOptions) -> Result<SynthModel> {
    config.validate()?;
    if table.n_rows() == 0 {
        return Err(Error::invalid("cannot train on an empty table"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let transformer = DataTransformer::fit(table, &config.gmm, &mut rng)?;
    let encoded = transformer.transform(table, &mut rng)?;
    let cond = CondSampler::fit(table);
    let rows = RowIndex::new(&cond, table);
    let width = transformer.output_width();
    let mut diagnostics = Vec::new();

    let pca = match config.variant {
        Variant::Ctgan => None,
        Variant::CtganRaw => Some(options.projection_override.unwrap_or_else(|| PcaTransform::identity(width))),
        Variant::MargCtgan => {
            let p = match options.projection_override {
                Some(p) => p,
                None => fit_pca(encoded.view())?,
            };
            if table.n_rows() < width || p.is_rank_deficient() {
                let msg = format!(
                    "rank-deficient PCA: {} training rows for {} encoded features (effective rank {}); \
                     moment matching beyond the rank is uninformative, consider ctgan-raw",
                    table.n_rows(),
                    width,
                    p.rank
                );
                log::warn!("{msg}");
                diagnostics.push(msg);
            }
            Some(p)
        }
    };
    if let Some(p) = &pca {
        if p.dim() != width {
            return Err(Error::shape(width, p.dim()));
        }
    }

    let gen_spec = NetSpec::new(
        config.latent_dim + cond.width(),
        &config.generator_hidden,
        Activation::Relu,
        width,
        Activation::Identity,
    );
    let critic_spec = NetSpec::new(width + cond.width(), &config.critic_hidden, Activation::LeakyRelu, 1, Activation::Identity);
    let mut generator = Mlp::new(&gen_spec, &mut rng);
    let mut critic = Mlp::new(&critic_spec, &mut rng);
    let mut gen_opt = AdamState::new(&generator, config.generator_adam);
    let mut critic_opt = AdamState::new(&critic, config.critic_adam);

    let heads = Heads::new(transformer.layout());
    let cat_spans = transformer.layout().categorical_spans();
    let batch = config.batch_size;
    let steps_per_epoch = (table.n_rows() / batch).max(1);
    let inv_b = 1.0 / batch as f64;
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut acc = EpochStats { epoch, critic_loss: 0.0, wasserstein: 0.0, penalty: 0.0, generator_loss: 0.0, cond_loss: 0.0, marg_loss: 0.0 };
        let mut real_last = Array2::zeros((0, width));
        for _ in 0..steps_per_epoch {
            for _ in 0..config.critic_steps {
                let z = normal_matrix(batch, config.latent_dim, &mut rng);
                let c1 = cond.sample_cond_vector(batch, &mut rng);
                let mut perm: Vec<usize> = (0..batch).collect();
                perm.shuffle(&mut rng);
                let mut real = Array2::zeros((batch, width));
                let mut c2 = Array2::zeros((batch, cond.width()));
                for (i, &p) in perm.iter().enumerate() {
                    let row = if cond.n_columns() == 0 {
                        rows.draw_any(&mut rng)
                    } else {
                        rows.draw(c1.columns[p], c1.categories[p], &mut rng)
                    };
                    real.row_mut(i).assign(&encoded.row(row));
                    c2.row_mut(i).assign(&c1.vectors.row(p));
                }

                let fake_raw = generator.predict(hstack(z.view(), c1.vectors.view()).view())?;
                let fake = heads.apply(&fake_raw, config.tau, &mut rng, false)?;
                let real_in = hstack(real.view(), c2.view());
                let fake_in = hstack(fake.value.view(), c1.vectors.view());

                let (y_real, cache_real) = critic.forward(real_in.view())?;
                let (y_fake, cache_fake) = critic.forward(fake_in.view())?;
                let mean_real = y_real.mean().expect("non-empty");
                let mean_fake = y_fake.mean().expect("non-empty");

                let (mut grads, _) = critic.backward(&cache_fake, Array2::from_elem((batch, 1), inv_b).view())?;
                let (g_real, _) = critic.backward(&cache_real, Array2::from_elem((batch, 1), -inv_b).view())?;
                grads.add_assign(&g_real);
                let penalty = critic.gradient_penalty(real_in.view(), fake_in.view(), &mut rng, config.lambda)?;
                grads.add_assign(&penalty.grads);
                check_finite(epoch, "critic gradients", &grads)?;
                critic_opt.step(&mut critic, &grads)?;

                acc.critic_loss += mean_fake - mean_real + penalty.value;
                acc.wasserstein += mean_real - mean_fake;
                acc.penalty += penalty.value;
                real_last = real;
            }

            let z = normal_matrix(batch, config.latent_dim, &mut rng);
            let c1 = cond.sample_cond_vector(batch, &mut rng);
            let (fake_raw, gen_cache) = generator.forward(hstack(z.view(), c1.vectors.view()).view())?;
            let fake = heads.apply(&fake_raw, config.tau, &mut rng, false)?;
            let fake_in = hstack(fake.value.view(), c1.vectors.view());
            let (y_fake, critic_cache) = critic.forward(fake_in.view())?;
            let adv = -y_fake.mean().expect("non-empty");
            let (_, dx) = critic.backward(&critic_cache, Array2::from_elem((batch, 1), -inv_b).view())?;
            let mut d_act = dx.slice(s![.., ..width]).to_owned();

            let mut marg = 0.0;
            if let Some(p) = &pca {
                let f = if is_identity(p) { Projection::Identity } else { Projection::Pca(p) };
                let target = MomentTarget::new(real_last.view(), f);
                let (loss, g) = marg_loss_with_grad(&target, fake.value.view(), f)?;
                marg = loss.total();
                d_act += &g;
            }

            let mut d_raw = heads.backward(&fake, &d_act, config.tau);
            let (ce, d_logits) = cond_term(&fake_raw, &cat_spans, &c1);
            d_raw += &d_logits;
            let (g_grads, _) = generator.backward(&gen_cache, d_raw.view())?;
            check_finite(epoch, "generator gradients", &g_grads)?;
            gen_opt.step(&mut generator, &g_grads)?;

            acc.generator_loss += adv + ce + marg;
            acc.cond_loss += ce;
            acc.marg_loss += marg;
        }
        let critic_n = (steps_per_epoch * config.critic_steps) as f64;
        acc.critic_loss /= critic_n;
        acc.wasserstein /= critic_n;
        acc.penalty /= critic_n;
        acc.generator_loss /= steps_per_epoch as f64;
        acc.cond_loss /= steps_per_epoch as f64;
        acc.marg_loss /= steps_per_epoch as f64;
        for (what, v) in [("critic loss", acc.critic_loss), ("generator loss", acc.generator_loss)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { epoch, what: what.into() });
            }
        }
        if !generator.is_finite() || !critic.is_finite() {
            return Err(Error::NonFinite { epoch, what: "network parameters".into() });
        }
        log::debug!(
            "epoch {epoch}: critic {:.4} w {:.4} gen {:.4} cond {:.4} marg {:.4}",
            acc.critic_loss,
            acc.wasserstein,
            acc.generator_loss,
            acc.cond_loss,
            acc.marg_loss
        );
        trace.push(acc);
    }

    Ok(SynthModel { config: config.clone(), transformer, cond, pca, generator, critic, trace, diagnostics })
}

/// Raw-space matching skips the (exact) identity multiply.
fn is_identity(p: &PcaTransform) -> bool {
    p.mean.iter().all(|&m| m == 0.0) && p.components == Array2::<f64>::eye(p.dim())
}

fn check_finite(epoch: usize, what: &str, g: &Grads) -> Result<()> {
    if g.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { epoch, what: what.into() })
    }
}

/// Conditional cross-entropy on the noise-free softmax of the generator's
/// raw logits, and its gradient with respect to those logits.
fn cond_term(raw: &Array2<f64>, cat_spans: &[Range<usize>], c: &CondBatch) -> (f64, Array2<f64>) {
    if c.columns.is_empty() {
        return (0.0, Array2::zeros(raw.raw_dim()));
    }
    let mut probs = Array2::zeros(raw.raw_dim());
    for span in cat_spans {
        probs.slice_mut(s![.., span.clone()]).assign(&softmax_rows(raw.slice(s![.., span.clone()])));
    }
    (cond_loss(probs.view(), cat_spans, c), cond_loss_logit_grad(probs.view(), cat_spans, c))
}

const SAMPLE_CHUNK: usize = 1000;

impl SynthModel {
    /// Generates `n` rows: latent noise, conditions drawn from the training
    /// frequencies, hard Gumbel-softmax spans, then decoding.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Table> {
        if n == 0 {
            return Err(Error::invalid("number of rows to sample must be positive"));
        }
        self.sample_rows(n, rng, |cs, b, rng| cs.sample_original(b, rng))
    }

    /// Like [`sample`](Self::sample) but with every row conditioned on
    /// `category` of table column `column`.
    pub fn sample_conditioned<R: Rng>(&self, n: usize, column: usize, category: usize, rng: &mut R) -> Result<Table> {
        let j = (0..self.cond.n_columns())
            .find(|&j| self.cond.table_column(j) == column)
            .ok_or_else(|| Error::invalid(format!("column {column} is not categorical")))?;
        if category >= self.cond.counts(j).len() {
            return Err(Error::invalid(format!("category {category} out of range")));
        }
        self.sample_rows(n, rng, |cs, b, _| cs.fixed(b, j, category))
    }

    fn sample_rows<R: Rng>(
        &self,
        n: usize,
        rng: &mut R,
        conditions: impl Fn(&CondSampler, usize, &mut R) -> CondBatch,
    ) -> Result<Table> {
        let heads = Heads::new(self.transformer.layout());
        let mut blocks = Vec::new();
        let mut done = 0;
        while done < n {
            let b = SAMPLE_CHUNK.min(n - done);
            let z = normal_matrix(b, self.config.latent_dim, rng);
            let c = conditions(&self.cond, b, rng);
            let raw = self.generator.predict(hstack(z.view(), c.vectors.view()).view())?;
            blocks.push(heads.apply(&raw, self.config.tau, rng, true)?.value);
            done += b;
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        let encoded = concatenate(Axis(0), &views).expect("same width");
        self.transformer.inverse_transform(encoded.view())
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }
}
