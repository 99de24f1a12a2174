use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

pub const LOG_STD_MIN: f64 = -8.0;
pub const LOG_STD_MAX: f64 = 4.0;

/// `log N(x; mean, std)` for a scalar.
pub fn normal_log_density(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
}

/// Diagonal Gaussian parameterized by mean and (clamped) log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Coordinates whose raw log-std fell outside `[LOG_STD_MIN, LOG_STD_MAX]`.
    clamped: Vec<bool>,
}

impl GaussianHead {
    pub fn new(mean: Vec<f64>, raw_log_std: Vec<f64>) -> Result<Self> {
        check_len("gaussian head", mean.len(), raw_log_std.len())?;
        if mean.iter().chain(&raw_log_std).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian head parameters"));
        }
        let clamped = raw_log_std
            .iter()
            .map(|&l| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&l))
            .collect();
        let log_std = raw_log_std
            .into_iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        Ok(Self {
            mean,
            log_std,
            clamped,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Reparameterized draw `mean + std ⊙ noise` and its log-density.
    pub fn sample(&self, noise: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("gaussian noise", self.dim(), noise.len())?;
        let sample: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.log_std)
            .zip(noise)
            .map(|((m, l), e)| m + l.exp() * e)
            .collect();
        let log_density = self.log_density(&sample);
        Ok((sample, log_density))
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.log_std)
            .map(|((x, m), l)| normal_log_density(*x, *m, l.exp()))
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|l| 0.5 * (2.0 * PI * std::f64::consts::E).ln() + l)
            .sum()
    }

    /// Gradients w.r.t. `(mean, raw log-std)` of `d_sample·sample + d_log_density·log_density`.
    ///
    /// The sample enters the log-density as a constant: only the explicit
    /// dependence on mean and log-std is differentiated.
    pub fn backward(&self, noise: &[f64], d_sample: &[f64], d_log_density: f64) -> (Vec<f64>, Vec<f64>) {
        let mut d_mean = Vec::with_capacity(self.dim());
        let mut d_log_std = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let std = self.log_std[j].exp();
            let e = noise[j];
            d_mean.push(d_sample[j] + d_log_density * e / std);
            let d_ls = d_sample[j] * std * e + d_log_density * (e * e - 1.0);
            d_log_std.push(if self.clamped[j] { 0.0 } else { d_ls });
        }
        (d_mean, d_log_std)
    }
}

/// Free-function form of [`GaussianHead::sample`].
pub fn gaussian_sample(head: &GaussianHead, noise: &[f64]) -> Result<(Vec<f64>, f64)> {
    head.sample(noise)
}

/// Categorical distribution over `logits.len()` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalHead {
    pub logits: Vec<f64>,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl CategoricalHead {
    pub fn new(logits: Vec<f64>) -> Self {
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = logits.iter().map(|l| l - log_z).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Self {
            logits,
            probs,
            log_probs,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    /// Inverse-CDF sampling from a uniform draw in `[0, 1)`.
    pub fn sample(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        for (a, p) in self.probs.iter().enumerate() {
            acc += p;
            if uniform < acc {
                return a;
            }
        }
        self.probs.len() - 1
    }

    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (a, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = a;
            }
        }
        best
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
            .sum::<f64>()
    }

    /// `d log p(action) / d logits = onehot(action) − p`.
    pub fn log_prob_grad(&self, action: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs.iter().map(|p| -p).collect();
        g[action] += 1.0;
        g
    }

    /// `d H / d logits_j = −p_j (log p_j + H)`.
    pub fn entropy_grad(&self) -> Vec<f64> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| -p * (l + h))
            .collect()
    }
}
