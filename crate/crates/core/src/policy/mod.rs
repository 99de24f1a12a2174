//! The RIRL actor: per-channel residual Gaussian encoders, an LSTM core and a
//! categorical action decoder.
//!
//! One decision step runs
//!
//! ```text
//! mean_k, std_k = q_k([o_k, h_t])          y_k = o_k + mean_k + std_k ⊙ ε_k
//! h_{t+1}      = lstm([y_1 … y_C], h_t)
//! a            ~ ω(· | [y, h_{t+1}])
//! log π        = log ω(a) + Σ_k log q_k(y_k)
//! ```
//!
//! Gradients of `log ω` flow back through the sampled encodings into the
//! encoders; the `log q_k` terms treat `y_k` as a constant.

mod checkpoint;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mi::{MiDiscriminator, PairBatch};
use crate::nn::{CategoricalHead, GaussianHead, LstmCache, LstmCell, LstmState, Mlp, MlpCache, ParamTensor, Parameterized};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};

/// Default log-std bias offset applied by environments at construction.
pub const DEFAULT_LOW_NOISE_OFFSET: f64 = -4.0;
/// Scale applied to encoder output weights so residual means start near zero.
const ENCODER_OUTPUT_SCALE: f64 = 0.01;

/// One observation channel with its attention cost (utility per nat).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub width: usize,
    pub cost: f64,
    /// Whether a discriminator measures `Ĩ(y_k; [o_k, h])` for this channel.
    pub discriminated: bool,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, width: usize, cost: f64) -> Self {
        Self {
            name: name.into(),
            width,
            cost,
            discriminated: cost > 0.0,
        }
    }

    /// Measure this channel's attention even when it is free.
    pub fn measured(mut self) -> Self {
        self.discriminated = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub channels: Vec<ChannelSpec>,
    /// Sizes of the independent categorical heads produced by the decoder.
    pub heads: Vec<usize>,
    pub encoder_hidden: usize,
    pub recurrent_hidden: usize,
    pub decoder_hidden: usize,
    /// Attention cost on `Ĩ(a; [y, h_{t+1}])`.
    pub decoder_cost: f64,
    pub decoder_discriminated: bool,
}

impl ActorConfig {
    pub fn new(channels: Vec<ChannelSpec>, heads: Vec<usize>) -> Self {
        Self {
            channels,
            heads,
            encoder_hidden: 64,
            recurrent_hidden: 32,
            decoder_hidden: 64,
            decoder_cost: 0.0,
            decoder_discriminated: false,
        }
    }

    pub fn with_sizes(mut self, encoder: usize, recurrent: usize, decoder: usize) -> Self {
        self.encoder_hidden = encoder;
        self.recurrent_hidden = recurrent;
        self.decoder_hidden = decoder;
        self
    }

    pub fn encoding_width(&self) -> usize {
        self.channels.iter().map(|c| c.width).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::InvalidConfig("actor needs at least one channel".into()));
        }
        for c in &self.channels {
            if c.width == 0 {
                return Err(Error::InvalidConfig(format!("channel `{}` has zero width", c.name)));
            }
            if !c.cost.is_finite() || c.cost < 0.0 {
                return Err(Error::InvalidConfig(format!("channel `{}` cost {} must be finite and >= 0", c.name, c.cost)));
            }
        }
        if self.heads.is_empty() || self.heads.contains(&0) {
            return Err(Error::InvalidConfig("decoder heads must be non-empty".into()));
        }
        if self.recurrent_hidden == 0 || self.encoder_hidden == 0 || self.decoder_hidden == 0 {
            return Err(Error::InvalidConfig("hidden sizes must be positive".into()));
        }
        if !self.decoder_cost.is_finite() || self.decoder_cost < 0.0 {
            return Err(Error::InvalidConfig("decoder cost must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Encoder output for one channel at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStep {
    pub obs: Vec<f64>,
    pub y: Vec<f64>,
    /// Distribution of the residual `y − o`.
    pub head: GaussianHead,
    pub noise: Vec<f64>,
    pub log_q: f64,
    cache: MlpCache,
}

impl ChannelStep {
    pub fn mean(&self) -> &[f64] {
        &self.head.mean
    }

    pub fn std(&self) -> Vec<f64> {
        self.head.std()
    }
}

/// Exogenous randomness for one decision: encoder noise and one uniform per head.
#[derive(Debug, Clone, PartialEq)]
pub struct ActNoise {
    pub channels: Vec<Vec<f64>>,
    pub uniforms: Vec<f64>,
}

impl ActNoise {
    pub fn draw<R: Rng + ?Sized>(config: &ActorConfig, rng: &mut R) -> Self {
        Self {
            channels: config
                .channels
                .iter()
                .map(|c| (0..c.width).map(|_| rng.sample(StandardNormal)).collect())
                .collect(),
            uniforms: config.heads.iter().map(|_| rng.random::<f64>()).collect(),
        }
    }
}

/// Full record of one actor decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ActStep {
    pub channels: Vec<ChannelStep>,
    pub y: Vec<f64>,
    pub hidden_before: LstmState,
    pub hidden_after: LstmState,
    pub actions: Vec<usize>,
    pub heads: Vec<CategoricalHead>,
    pub log_omega: f64,
    pub log_pi: f64,
    cell_cache: LstmCache,
    decoder_cache: MlpCache,
}

impl ActStep {
    pub fn log_q_sum(&self) -> f64 {
        self.channels.iter().map(|c| c.log_q).sum()
    }

    pub fn decoder_entropy(&self) -> f64 {
        self.heads.iter().map(CategoricalHead::entropy).sum()
    }

    /// `[o_k, h_t]`, the context of channel `k`'s discriminator.
    pub fn channel_context(&self, k: usize) -> Vec<f64> {
        let mut ctx = self.channels[k].obs.clone();
        ctx.extend_from_slice(&self.hidden_before.h);
        ctx
    }

    /// Concatenated one-hot encoding of the chosen actions.
    pub fn action_one_hot(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (head, &a) in self.heads.iter().zip(&self.actions) {
            let start = out.len();
            out.resize(start + head.probs().len(), 0.0);
            out[start + a] = 1.0;
        }
        out
    }

    /// `[y, h_{t+1}]`, the context of the decoder discriminator.
    pub fn decoder_context(&self) -> Vec<f64> {
        let mut ctx = self.y.clone();
        ctx.extend_from_slice(&self.hidden_after.h);
        ctx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RirlActor {
    config: ActorConfig,
    pub encoders: Vec<Mlp>,
    pub cell: LstmCell,
    pub decoder: Mlp,
}

impl RirlActor {
    pub fn new<R: Rng + ?Sized>(config: ActorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let hs = config.recurrent_hidden;
        let encoders = config
            .channels
            .iter()
            .map(|c| {
                let mut enc = Mlp::new(&[c.width + hs, config.encoder_hidden, 2 * c.width], rng);
                let out = enc.output_layer_mut();
                out.weight.values.iter_mut().for_each(|w| *w *= ENCODER_OUTPUT_SCALE);
                out.bias.values.iter_mut().for_each(|b| *b = 0.0);
                enc
            })
            .collect();
        let width = config.encoding_width();
        let cell = LstmCell::new(width, hs, rng);
        let total_actions: usize = config.heads.iter().sum();
        let decoder = Mlp::new(&[width + hs, config.decoder_hidden, total_actions], rng);
        Ok(Self {
            config,
            encoders,
            cell,
            decoder,
        })
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.config.channels
    }

    pub fn set_channel_cost(&mut self, k: usize, cost: f64) {
        self.config.channels[k].cost = cost;
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState::zeros(self.config.recurrent_hidden)
    }

    /// Shifts every encoder's log-std output bias by `offset` (`offset <= 0`).
    pub fn init_low_noise(&mut self, offset: f64) {
        for (enc, spec) in self.encoders.iter_mut().zip(&self.config.channels) {
            let w = spec.width;
            let out = enc.output_layer_mut();
            for b in &mut out.bias.values[w..2 * w] {
                *b += offset;
            }
        }
    }

    /// Stochastic encoding of channel `k` given the pre-step hidden state.
    pub fn encode_channel(&self, k: usize, obs: &[f64], hidden: &LstmState, noise: &[f64]) -> Result<ChannelStep> {
        let spec = self
            .config
            .channels
            .get(k)
            .ok_or_else(|| Error::InvalidConfig(format!("no channel {k}")))?;
        check_len("channel observation", spec.width, obs.len())?;
        check_len("channel noise", spec.width, noise.len())?;
        check_len("hidden state", self.config.recurrent_hidden, hidden.h.len())?;
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("channel observation"));
        }
        let mut input = Vec::with_capacity(obs.len() + hidden.h.len());
        input.extend_from_slice(obs);
        input.extend_from_slice(&hidden.h);
        let (out, cache) = self.encoders[k].forward_unchecked(&input);
        let w = spec.width;
        let head = GaussianHead::new(out[..w].to_vec(), out[w..].to_vec())?;
        let (residual, log_q) = head.sample(noise)?;
        let y = obs.iter().zip(&residual).map(|(o, r)| o + r).collect();
        Ok(ChannelStep {
            obs: obs.to_vec(),
            y,
            head,
            noise: noise.to_vec(),
            log_q,
            cache,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[Vec<f64>], hidden: &LstmState, rng: &mut R) -> Result<ActStep> {
        let noise = ActNoise::draw(&self.config, rng);
        self.act_with_noise(obs, hidden, &noise)
    }

    pub fn act_with_noise(&self, obs: &[Vec<f64>], hidden: &LstmState, noise: &ActNoise) -> Result<ActStep> {
        check_len("observation channels", self.config.channels.len(), obs.len())?;
        check_len("noise channels", self.config.channels.len(), noise.channels.len())?;
        check_len("action uniforms", self.config.heads.len(), noise.uniforms.len())?;
        let channels = obs
            .iter()
            .zip(&noise.channels)
            .enumerate()
            .map(|(k, (o, e))| self.encode_channel(k, o, hidden, e))
            .collect::<Result<Vec<_>>>()?;
        let y: Vec<f64> = channels.iter().flat_map(|c| c.y.iter().copied()).collect();
        let (hidden_after, cell_cache) = self.cell.step(&y, hidden)?;
        let mut dec_in = y.clone();
        dec_in.extend_from_slice(&hidden_after.h);
        let (logits, decoder_cache) = self.decoder.forward_unchecked(&dec_in);
        let mut heads = Vec::with_capacity(self.config.heads.len());
        let mut actions = Vec::with_capacity(self.config.heads.len());
        let mut log_omega = 0.0;
        let mut offset = 0;
        for (&size, &u) in self.config.heads.iter().zip(&noise.uniforms) {
            let head = CategoricalHead::new(logits[offset..offset + size].to_vec());
            let a = head.sample(u);
            log_omega += head.log_prob(a);
            actions.push(a);
            heads.push(head);
            offset += size;
        }
        let log_pi = log_omega + channels.iter().map(|c| c.log_q).sum::<f64>();
        Ok(ActStep {
            channels,
            y,
            hidden_before: hidden.clone(),
            hidden_after,
            actions,
            heads,
            log_omega,
            log_pi,
            cell_cache,
            decoder_cache,
        })
    }

    /// Recomputes `log π` from the stored encodings, hidden state and actions.
    pub fn replay_log_pi(&self, step: &ActStep) -> Result<f64> {
        let mut log_q = 0.0;
        for (k, ch) in step.channels.iter().enumerate() {
            let mut input = ch.obs.clone();
            input.extend_from_slice(&step.hidden_before.h);
            let (out, _) = self.encoders[k].forward(&input)?;
            let w = ch.obs.len();
            let head = GaussianHead::new(out[..w].to_vec(), out[w..].to_vec())?;
            let residual: Vec<f64> = ch.y.iter().zip(&ch.obs).map(|(y, o)| y - o).collect();
            log_q += head.log_density(&residual);
        }
        let hidden_after = crate::nn::recurrent_step(&self.cell, &step.y, &step.hidden_before)?;
        let mut dec_in = step.y.clone();
        dec_in.extend_from_slice(&hidden_after.h);
        let logits = self.decoder.predict(&dec_in);
        let mut log_omega = 0.0;
        let mut offset = 0;
        for (&size, &a) in self.config.heads.iter().zip(&step.actions) {
            log_omega += CategoricalHead::new(logits[offset..offset + size].to_vec()).log_prob(a);
            offset += size;
        }
        Ok(log_omega + log_q)
    }

    /// Adds `scale · ∇θ Σ_t (logpi_weights[t]·log π_t + entropy_weights[t]·H(ω_t))`
    /// into the parameter gradients, backpropagating through time.
    ///
    /// `steps` must be one episode of consecutive decisions of this actor.
    pub fn accumulate_gradients(&mut self, steps: &[ActStep], logpi_weights: &[f64], entropy_weights: &[f64], scale: f64) {
        let heads: Vec<Vec<f64>> = logpi_weights.iter().map(|&w| vec![w; self.config.heads.len()]).collect();
        self.accumulate_split_gradients(steps, &heads, logpi_weights, entropy_weights, scale);
    }

    /// Like [`accumulate_gradients`](Self::accumulate_gradients) with a
    /// separate weight per action head on `log ω_j` and `code_weights` on
    /// the `log q_k` terms.
    pub fn accumulate_split_gradients(
        &mut self,
        steps: &[ActStep],
        head_weights: &[Vec<f64>],
        code_weights: &[f64],
        entropy_weights: &[f64],
        scale: f64,
    ) {
        assert_eq!(steps.len(), head_weights.len());
        assert_eq!(steps.len(), code_weights.len());
        assert_eq!(steps.len(), entropy_weights.len());
        let hs = self.config.recurrent_hidden;
        let width = self.config.encoding_width();
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        for t in (0..steps.len()).rev() {
            let step = &steps[t];
            let w = code_weights[t] * scale;
            let ew = entropy_weights[t] * scale;
            let mut d_logits = Vec::with_capacity(self.decoder.output_dim());
            for ((head, &a), &hw) in step.heads.iter().zip(&step.actions).zip(&head_weights[t]) {
                let w = hw * scale;
                let g = head.log_prob_grad(a);
                if ew != 0.0 {
                    let ge = head.entropy_grad();
                    d_logits.extend(g.iter().zip(&ge).map(|(g, e)| w * g + ew * e));
                } else {
                    d_logits.extend(g.iter().map(|g| w * g));
                }
            }
            let d_dec_in = self.decoder.backward(&step.decoder_cache, &d_logits);
            let (dy_dec, dh_dec) = d_dec_in.split_at(width);
            let dh: Vec<f64> = dh_dec.iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dy_cell, mut dh_prev, dc_prev) = self.cell.backward(&step.cell_cache, &dh, &dc_next);
            let mut offset = 0;
            for (k, ch) in step.channels.iter().enumerate() {
                let cw = ch.obs.len();
                let d_sample: Vec<f64> = (offset..offset + cw).map(|j| dy_dec[j] + dy_cell[j]).collect();
                let (d_mean, d_log_std) = ch.head.backward(&ch.noise, &d_sample, w);
                let mut d_out = d_mean;
                d_out.extend(d_log_std);
                let d_in = self.encoders[k].backward(&ch.cache, &d_out);
                for (a, b) in dh_prev.iter_mut().zip(&d_in[cw..]) {
                    *a += b;
                }
                offset += cw;
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
    }
}

impl Parameterized for RirlActor {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor)) {
        for enc in &self.encoders {
            enc.visit_params(f);
        }
        self.cell.visit_params(f);
        self.decoder.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor)) {
        for enc in &mut self.encoders {
            enc.visit_params_mut(f);
        }
        self.cell.visit_params_mut(f);
        self.decoder.visit_params_mut(f);
    }
}

/// Pointwise attention estimates for one step: per channel (where measured) and decoder.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Penalties {
    pub channels: Vec<Option<f64>>,
    pub decoder: Option<f64>,
}

impl Penalties {
    /// `Σ_k λ_k Ĩ_k + λ_ω Ĩ_ω` for the given effective costs.
    pub fn cost(&self, channel_costs: &[f64], decoder_cost: f64) -> f64 {
        let channels: f64 = self
            .channels
            .iter()
            .zip(channel_costs)
            .map(|(mi, lam)| mi.map_or(0.0, |m| lam * m))
            .sum();
        channels + self.decoder.map_or(0.0, |m| decoder_cost * m)
    }
}

/// The discriminators attached to one actor.
#[derive(Debug, Clone)]
pub struct ActorDiscriminators {
    pub channels: Vec<Option<MiDiscriminator>>,
    pub decoder: Option<MiDiscriminator>,
}

impl ActorDiscriminators {
    pub fn new<R: Rng + ?Sized>(actor: &RirlActor, hidden: &[usize], lr: f64, rng: &mut R) -> Self {
        let hs = actor.config.recurrent_hidden;
        let channels = actor
            .config
            .channels
            .iter()
            .map(|c| c.discriminated.then(|| MiDiscriminator::new(c.width, c.width + hs, hidden, lr, rng)))
            .collect();
        let decoder = actor.config.decoder_discriminated.then(|| {
            let actions: usize = actor.config.heads.iter().sum();
            MiDiscriminator::new(actions, actor.config.encoding_width() + hs, hidden, lr, rng)
        });
        Self { channels, decoder }
    }

    pub fn is_empty(&self) -> bool {
        self.channels.iter().all(Option::is_none) && self.decoder.is_none()
    }

    /// Trains every discriminator once on the joint pairs from `steps`.
    /// Returns the mean loss per channel (then decoder), `None` where absent.
    pub fn train_on<R: Rng + ?Sized>(&mut self, steps: &[&ActStep], rng: &mut R) -> Result<Vec<Option<f64>>> {
        let mut losses = Vec::new();
        for k in 0..self.channels.len() {
            let loss = match &mut self.channels[k] {
                Some(d) if steps.len() >= 2 => {
                    let joint = PairBatch::joint(
                        steps.iter().map(|s| s.channels[k].y.clone()).collect(),
                        steps.iter().map(|s| s.channel_context(k)).collect(),
                    );
                    let fact = crate::mi::make_factorized(&joint, rng)?;
                    Some(d.train_step(&joint, &fact)?)
                }
                _ => None,
            };
            losses.push(loss);
        }
        let dec = match &mut self.decoder {
            Some(d) if steps.len() >= 2 => {
                let joint = PairBatch::joint(
                    steps.iter().map(|s| s.action_one_hot()).collect(),
                    steps.iter().map(|s| s.decoder_context()).collect(),
                );
                let fact = crate::mi::make_factorized(&joint, rng)?;
                Some(d.train_step(&joint, &fact)?)
            }
            _ => None,
        };
        losses.push(dec);
        Ok(losses)
    }

    /// `(Ĩ_1, …, Ĩ_C, Ĩ_ω)` for one step; contexts include the hidden state.
    pub fn attention_penalties(&self, step: &ActStep) -> Penalties {
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(k, d)| d.as_ref().map(|d| d.logit(&step.channels[k].y, &step.channel_context(k))))
            .collect();
        let decoder = self
            .decoder
            .as_ref()
            .map(|d| d.logit(&step.action_one_hot(), &step.decoder_context()));
        Penalties { channels, decoder }
    }
}

/// Free-function form of [`ActorDiscriminators::attention_penalties`].
pub fn attention_penalties(step: &ActStep, discriminators: &ActorDiscriminators) -> Penalties {
    discriminators.attention_penalties(step)
}

#[cfg(test)]
mod tests;
