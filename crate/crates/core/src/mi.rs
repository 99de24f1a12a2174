//! Pointwise mutual-information estimation with a density-ratio classifier.
//!
//! A discriminator is trained to tell joint pairs `(x, c) ~ p(x, c)` from
//! factorized pairs `(x, c) ~ p(x)p(c)`. With balanced classes the Bayes-optimal
//! logit equals `log p(x, c) − log p(x)p(c)`, so the logit of a joint sample is a
//! single-sample estimate of its pointwise MI and the batch mean estimates `I(x; c)`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::nn::{Adam, Mlp, Parameterized, StepOutcome};

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    Joint,
    Factorized,
}

/// Aligned output/context vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub outputs: Vec<Vec<f64>>,
    pub contexts: Vec<Vec<f64>>,
    pub pairing: Pairing,
}

impl PairBatch {
    pub fn joint(outputs: Vec<Vec<f64>>, contexts: Vec<Vec<f64>>) -> Self {
        assert_eq!(outputs.len(), contexts.len());
        Self {
            outputs,
            contexts,
            pairing: Pairing::Joint,
        }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Uniformly random permutation of `0..n` with no fixed points (`n >= 2`).
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::BatchTooSmall(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Re-pairs each context with a different sample's output.
pub fn make_factorized<R: Rng + ?Sized>(batch: &PairBatch, rng: &mut R) -> Result<PairBatch> {
    let perm = derangement(batch.len(), rng)?;
    Ok(PairBatch {
        outputs: perm.iter().map(|&p| batch.outputs[p].clone()).collect(),
        contexts: batch.contexts.clone(),
        pairing: Pairing::Factorized,
    })
}

/// Binary classifier whose logit estimates the pointwise log density ratio.
#[derive(Debug, Clone)]
pub struct MiDiscriminator {
    net: Mlp,
    optimizer: Adam,
    output_dim: usize,
    context_dim: usize,
    input: Vec<f64>,
}

impl MiDiscriminator {
    pub fn new<R: Rng + ?Sized>(
        output_dim: usize,
        context_dim: usize,
        hidden: &[usize],
        lr: f64,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![output_dim + context_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            net: Mlp::new(&sizes, rng),
            optimizer: Adam::new(lr),
            output_dim,
            context_dim,
            input: Vec::with_capacity(output_dim + context_dim),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn learning_rate(&self) -> f64 {
        self.optimizer.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.optimizer.lr = lr;
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    fn stage(&mut self, output: &[f64], context: &[f64]) {
        self.input.clear();
        self.input.extend_from_slice(output);
        self.input.extend_from_slice(context);
    }

    /// Classifier logit, read as the pointwise MI estimate in nats.
    pub fn logit(&self, output: &[f64], context: &[f64]) -> f64 {
        let mut x = Vec::with_capacity(output.len() + context.len());
        x.extend_from_slice(output);
        x.extend_from_slice(context);
        self.net.predict(&x)[0]
    }

    pub fn pointwise_mi(&self, output: &[f64], context: &[f64]) -> Result<f64> {
        check_len("discriminator output", self.output_dim, output.len())?;
        check_len("discriminator context", self.context_dim, context.len())?;
        Ok(self.logit(output, context))
    }

    pub fn batch_mean_mi(&self, batch: &PairBatch) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        batch
            .outputs
            .iter()
            .zip(&batch.contexts)
            .map(|(o, c)| self.logit(o, c))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Mean binary cross-entropy over both halves without updating.
    pub fn loss(&self, joint: &PairBatch, factorized: &PairBatch) -> f64 {
        let n = (joint.len() + factorized.len()) as f64;
        let mut total = 0.0;
        for (batch, label) in [(joint, 1.0), (factorized, 0.0)] {
            for (o, c) in batch.outputs.iter().zip(&batch.contexts) {
                total += bce_with_logit(self.logit(o, c), label);
            }
        }
        total / n
    }

    /// Fills the network gradients with those of [`loss`](Self::loss)
    /// (joint = 1, factorized = 0) and returns the loss.
    pub fn accumulate_loss_gradient(&mut self, joint: &PairBatch, factorized: &PairBatch) -> Result<f64> {
        if joint.len() != factorized.len() {
            return Err(Error::Unbalanced {
                joint: joint.len(),
                factorized: factorized.len(),
            });
        }
        self.net.zero_grad();
        if joint.is_empty() {
            return Ok(std::f64::consts::LN_2);
        }
        let n = (2 * joint.len()) as f64;
        let mut total = 0.0;
        for (batch, label) in [(joint, 1.0), (factorized, 0.0)] {
            for (o, c) in batch.outputs.iter().zip(&batch.contexts) {
                check_len("discriminator output", self.output_dim, o.len())?;
                check_len("discriminator context", self.context_dim, c.len())?;
                self.stage(o, c);
                let (out, cache) = self.net.forward_unchecked(&self.input);
                let logit = out[0];
                total += bce_with_logit(logit, label);
                let d = (sigmoid(logit) - label) / n;
                self.net.backward(&cache, &[d]);
            }
        }
        Ok(total / n)
    }

    /// One cross-entropy gradient step (joint = 1, factorized = 0); returns the mean loss.
    pub fn train_step(&mut self, joint: &PairBatch, factorized: &PairBatch) -> Result<f64> {
        let loss = self.accumulate_loss_gradient(joint, factorized)?;
        if joint.is_empty() {
            return Ok(loss);
        }
        if !loss.is_finite() {
            log::warn!("non-finite discriminator loss; skipping update");
            self.net.zero_grad();
            return Ok(loss);
        }
        if self.optimizer.step(&mut self.net)? == StepOutcome::Skipped {
            log::warn!("discriminator update skipped");
        }
        Ok(loss)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn bce_with_logit(logit: f64, label: f64) -> f64 {
    if label > 0.5 {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}
