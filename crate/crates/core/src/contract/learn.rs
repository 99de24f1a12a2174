//! REINFORCE over pay schedules.
//!
//! The Principal's policy is a diagonal Gaussian over the schedule
//! parameters `(μ_z, ln σ_z)`. Each sampled schedule is scored by the
//! N-sample reward; the schedule reported after training is the policy mean.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    exact_expected_utilities, exact_principal_utility, fit_mirrlees, mi_features, output_marginal, quantal_response,
    agent_policy, sample_outcomes, schedule_mutual_information, score_entropy, score_mi, MirrleesFit,
    OutputGrid, PaySchedule, QuantalAgent, RewardSample,
};
use crate::error::{Error, Result};
use crate::mi::{make_factorized, MiDiscriminator, PairBatch};
use crate::nn::{Adam, ParamTensor, Parameterized};
use crate::rng::{self, streams};
use crate::trainer::anneal_lambda;

/// Which attention cost the Principal faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// Discriminator estimate of `I(w; z)`, as a cost.
    Mi,
    /// Schedule entropy, as a bonus.
    Entropy,
}

impl Regularizer {
    pub fn label(self) -> &'static str {
        match self {
            Regularizer::Mi => "mi",
            Regularizer::Entropy => "entropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractConfig {
    pub grid: OutputGrid,
    pub agent: QuantalAgent,
    pub lambda: f64,
    pub regularizer: Regularizer,
    /// Outcomes drawn per sampled schedule.
    pub samples_per_schedule: usize,
    /// Schedules per batch.
    pub batch_size: usize,
    pub batches: usize,
    pub policy_lr: f64,
    pub discriminator_lr: f64,
    pub discriminator_hidden: Vec<usize>,
    pub anneal_rate: f64,
    pub seed: u64,
    pub mu_bounds: (f64, f64),
    pub sigma_bounds: (f64, f64),
    pub init_mu: f64,
    pub init_sigma: f64,
    /// Initial exploration std of the schedule policy, per parameter.
    pub explore_std: f64,
    /// Discriminator steps on the final schedule before measuring `Ĩ`.
    pub eval_discriminator_steps: usize,
    pub eval_samples: usize,
    /// Pair every schedule perturbation with its mirror image.
    pub antithetic: bool,
    /// Fraction of `policy_lr` left at the final batch (linear decay).
    pub final_lr_fraction: f64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        Self {
            grid: OutputGrid::default(),
            agent: QuantalAgent::default(),
            lambda: 0.0,
            regularizer: Regularizer::Mi,
            samples_per_schedule: 8,
            batch_size: 128,
            batches: 100_000,
            policy_lr: 1e-3,
            discriminator_lr: 5e-3,
            discriminator_hidden: crate::mi::DEFAULT_HIDDEN.to_vec(),
            anneal_rate: 4.0 / 10_000.0,
            seed: 0,
            mu_bounds: (0.0, 20.0),
            sigma_bounds: (0.05, 5.0),
            init_mu: 0.5,
            init_sigma: 0.5,
            explore_std: 0.3,
            eval_discriminator_steps: 200,
            eval_samples: 4096,
            antithetic: true,
            final_lr_fraction: 1.0,
        }
    }
}

impl ContractConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.samples_per_schedule == 0 {
            return bad("samples per schedule must be >= 1");
        }
        if self.batch_size < 2 {
            return bad("contract batch size must be >= 2");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and >= 0");
        }
        let (lo, hi) = self.sigma_bounds;
        if !(lo > 0.0 && hi > lo) || self.mu_bounds.1 <= self.mu_bounds.0 {
            return bad("invalid schedule bounds");
        }
        if self.agent.beta.0 < 0.0 || self.agent.beta.0.is_nan() {
            return bad("beta must be >= 0");
        }
        Ok(())
    }
}

const EXPLORE_LOG_STD: (f64, f64) = (-6.0, 1.0);

/// Diagonal Gaussian over `(μ_0 … μ_Z, ln σ_0 … ln σ_Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePolicy {
    pub mean: ParamTensor,
    pub log_std: ParamTensor,
    levels: usize,
    mu_bounds: (f64, f64),
    sigma_bounds: (f64, f64),
}

impl SchedulePolicy {
    pub fn new(config: &ContractConfig) -> Self {
        let n = config.grid.len();
        let mut mean = vec![config.init_mu; n];
        mean.extend(std::iter::repeat_n(config.init_sigma.ln(), n));
        Self {
            mean: ParamTensor::from_values(2 * n, 1, mean),
            log_std: ParamTensor::from_values(2 * n, 1, vec![config.explore_std.ln(); 2 * n]),
            levels: n,
            mu_bounds: config.mu_bounds,
            sigma_bounds: config.sigma_bounds,
        }
    }

    pub fn to_schedule(&self, x: &[f64]) -> PaySchedule {
        let n = self.levels;
        let (lo, hi) = (self.sigma_bounds.0.ln(), self.sigma_bounds.1.ln());
        PaySchedule {
            mu: x[..n].iter().map(|m| m.clamp(self.mu_bounds.0, self.mu_bounds.1)).collect(),
            sigma: x[n..].iter().map(|l| l.clamp(lo, hi).exp()).collect(),
        }
    }

    pub fn mean_schedule(&self) -> PaySchedule {
        self.to_schedule(&self.mean.values)
    }

    /// A perturbed parameter vector and the standard-normal noise behind it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let eps: Vec<f64> = (0..2 * self.levels).map(|_| rng.sample(StandardNormal)).collect();
        (self.perturb(&eps), eps)
    }

    pub fn perturb(&self, eps: &[f64]) -> Vec<f64> {
        self
            .mean
            .values
            .iter()
            .zip(&self.log_std.values)
            .zip(eps)
            .map(|((m, l), e)| m + l.exp() * e)
            .collect()
    }

    /// Adds `weight · ∇ log p(x)` for the sample with noise `eps`.
    pub fn accumulate_score(&mut self, eps: &[f64], weight: f64) {
        for (j, e) in eps.iter().enumerate() {
            let s = self.log_std.values[j].exp();
            self.mean.grads[j] += weight * e / s;
            self.log_std.grads[j] += weight * (e * e - 1.0);
        }
    }

    fn clamp_exploration(&mut self) {
        for l in &mut self.log_std.values {
            *l = l.clamp(EXPLORE_LOG_STD.0, EXPLORE_LOG_STD.1);
        }
        let n = self.levels;
        for m in &mut self.mean.values[..n] {
            *m = m.clamp(self.mu_bounds.0 - 1.0, self.mu_bounds.1 + 1.0);
        }
        let (lo, hi) = (self.sigma_bounds.0.ln(), self.sigma_bounds.1.ln());
        for l in &mut self.mean.values[n..] {
            *l = l.clamp(lo - 1.0, hi + 1.0);
        }
    }
}

impl Parameterized for SchedulePolicy {
    fn visit_params(&self, f: &mut dyn FnMut(&ParamTensor)) {
        f(&self.mean);
        f(&self.log_std);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut ParamTensor)) {
        f(&mut self.mean);
        f(&mut self.log_std);
    }
}

/// Per-batch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub batch: usize,
    pub lambda: f64,
    pub mean_reward: f64,
    pub mean_principal_utility: f64,
    pub mean_penalty: f64,
    pub schedule_range: f64,
}

/// Exact outcomes of a schedule under the noise-free Agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub effort_policy: Vec<f64>,
    pub principal_utility: f64,
    pub agent_utility: f64,
    /// Mean discriminator estimate over joint samples.
    pub mi_estimate: f64,
    /// Numerically integrated `I(w; z)`.
    pub mi_exact: f64,
}

#[derive(Debug, Clone)]
pub struct ContractOutcome {
    pub config: ContractConfig,
    pub policy: SchedulePolicy,
    pub schedule: PaySchedule,
    pub discriminator: MiDiscriminator,
    pub history: Vec<BatchStats>,
    pub evaluation: Evaluation,
    pub fit: MirrleesFit,
}

fn disc_batch(outcomes: &[super::Outcome], grid: &OutputGrid) -> PairBatch {
    let (w, z): (Vec<_>, Vec<_>) = outcomes.iter().map(|o| mi_features(o, grid)).unzip();
    PairBatch::joint(w, z)
}

/// Trains the discriminator once on the given outcomes.
fn train_discriminator<R: Rng + ?Sized>(
    disc: &mut MiDiscriminator,
    outcomes: &[super::Outcome],
    grid: &OutputGrid,
    rng: &mut R,
) -> Result<f64> {
    let joint = disc_batch(outcomes, grid);
    let fact = make_factorized(&joint, rng)?;
    disc.train_step(&joint, &fact)
}

/// Exact utilities of `schedule`; `Ĩ` from `disc` on fresh samples.
pub fn evaluate_schedule<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    agent: &QuantalAgent,
    grid: &OutputGrid,
    disc: &MiDiscriminator,
    samples: usize,
    rng: &mut R,
) -> Result<Evaluation> {
    let utils = exact_expected_utilities(schedule, agent, grid)?;
    let policy = quantal_response(&utils, agent.beta);
    let agent_utility = policy.iter().zip(&utils).map(|(p, u)| p * u).sum();
    let principal_utility = exact_principal_utility(schedule, &policy, grid)?;
    let pz = output_marginal(&policy, grid)?;
    let mi_exact = schedule_mutual_information(schedule, &pz);
    let outcomes = sample_outcomes(schedule, &policy, grid, samples.max(1), rng)?;
    let joint = disc_batch(&outcomes, grid);
    Ok(Evaluation {
        effort_policy: policy,
        principal_utility,
        agent_utility,
        mi_estimate: disc.batch_mean_mi(&joint),
        mi_exact,
    })
}

/// Learns a pay schedule for one `(λ, β, seed)` point.
pub fn learn_schedule(config: &ContractConfig) -> Result<ContractOutcome> {
    config.validate()?;
    let grid = &config.grid;
    let mut init_rng = rng::stream(config.seed, streams::INIT);
    let mut policy = SchedulePolicy::new(config);
    let mut disc = MiDiscriminator::new(1, 1, &config.discriminator_hidden, config.discriminator_lr, &mut init_rng);
    let mut optimizer = Adam::new(config.policy_lr);
    let mut rollout_rng = rng::stream(config.seed, streams::ROLLOUT);
    let mut disc_rng = rng::stream(config.seed, streams::DISCRIMINATOR);
    let mut history = Vec::with_capacity(config.batches);

    for batch in 0..config.batches {
        let lambda = anneal_lambda(batch, config.lambda, config.anneal_rate);
        let mut draws = Vec::with_capacity(config.batch_size);
        let mut all = Vec::with_capacity(config.batch_size * config.samples_per_schedule);
        let mut mirror: Option<Vec<f64>> = None;
        for _ in 0..config.batch_size {
            let eps = match mirror.take() {
                Some(e) => e,
                None => {
                    let (_, e) = policy.sample(&mut rollout_rng);
                    if config.antithetic {
                        mirror = Some(e.iter().map(|v| -v).collect());
                    }
                    e
                }
            };
            let x = policy.perturb(&eps);
            let schedule = policy.to_schedule(&x);
            let pi = agent_policy(&schedule, &config.agent, grid, &mut rollout_rng)?;
            let outcomes = sample_outcomes(&schedule, &pi, grid, config.samples_per_schedule, &mut rollout_rng)?;
            all.extend_from_slice(&outcomes);
            draws.push((eps, schedule, outcomes));
        }
        train_discriminator(&mut disc, &all, grid, &mut disc_rng)?;
        let scored: Vec<(Vec<f64>, RewardSample)> = draws
            .into_iter()
            .map(|(eps, schedule, outcomes)| {
                let r = match config.regularizer {
                    Regularizer::Mi => score_mi(outcomes, grid, lambda, &disc),
                    Regularizer::Entropy => score_entropy(outcomes, &schedule, lambda),
                };
                (eps, r)
            })
            .collect();
        let n = scored.len() as f64;
        let mean = scored.iter().map(|(_, r)| r.reward).sum::<f64>() / n;
        if !mean.is_finite() {
            return Err(Error::Divergence {
                batch,
                detail: format!("non-finite contract reward; schedule {:?}", policy.mean_schedule()),
            });
        }
        let var = scored.iter().map(|(_, r)| (r.reward - mean).powi(2)).sum::<f64>() / n;
        let scale = 1.0 / (var.sqrt() + 1e-8);
        policy.zero_grad();
        for (eps, r) in &scored {
            // Adam descends, so accumulate the gradient of the negated objective.
            policy.accumulate_score(eps, -(r.reward - mean) * scale / n);
        }
        let progress = batch as f64 / config.batches.max(1) as f64;
        optimizer.lr = config.policy_lr * (1.0 - (1.0 - config.final_lr_fraction) * progress);
        optimizer.step(&mut policy)?;
        policy.clamp_exploration();
        history.push(BatchStats {
            batch,
            lambda,
            mean_reward: mean,
            mean_principal_utility: scored.iter().map(|(_, r)| r.mean_principal_utility).sum::<f64>() / n,
            mean_penalty: scored.iter().map(|(_, r)| r.mean_penalty).sum::<f64>() / n,
            schedule_range: policy.mean_schedule().range(),
        });
    }

    let schedule = policy.mean_schedule();
    let mut eval_rng = rng::stream(config.seed, streams::EVAL);
    let exact_policy = quantal_response(&exact_expected_utilities(&schedule, &config.agent, grid)?, config.agent.beta);
    let per_step = (config.batch_size * config.samples_per_schedule).max(2);
    for _ in 0..config.eval_discriminator_steps {
        let outcomes = sample_outcomes(&schedule, &exact_policy, grid, per_step, &mut eval_rng)?;
        train_discriminator(&mut disc, &outcomes, grid, &mut eval_rng)?;
    }
    let evaluation = evaluate_schedule(&schedule, &config.agent, grid, &disc, config.eval_samples, &mut eval_rng)?;
    let zs: Vec<f64> = grid.levels().map(|z| z as f64).collect();
    let fit = fit_mirrlees(&zs, &schedule.mu)?;
    Ok(ContractOutcome {
        config: config.clone(),
        policy,
        schedule,
        discriminator: disc,
        history,
        evaluation,
        fit,
    })
}

/// One row per output level of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractRow {
    pub condition: String,
    pub lambda: f64,
    pub beta: String,
    pub seed: u64,
    pub z: usize,
    pub mu_z: f64,
    pub sigma_z: f64,
    pub u_p: f64,
    pub u_a: f64,
    pub mi_wz: f64,
    pub mi_exact: f64,
    /// Principal utility of the constant zero-pay schedule.
    pub u_p_zero_pay: f64,
    pub fit_a: f64,
    pub fit_b: f64,
    pub fit_c: f64,
    pub fit_rho: f64,
    pub fit_r2: f64,
}

impl ContractOutcome {
    pub fn rows(&self) -> Vec<ContractRow> {
        let ev = &self.evaluation;
        let zero_pay = zero_pay_principal_utility(&self.config).unwrap_or(f64::NAN);
        (0..self.schedule.len())
            .map(|z| ContractRow {
                condition: self.config.regularizer.label().into(),
                lambda: self.config.lambda,
                beta: self.config.agent.beta.label(),
                seed: self.config.seed,
                z,
                mu_z: self.schedule.mu[z],
                sigma_z: self.schedule.sigma[z],
                u_p: ev.principal_utility,
                u_a: ev.agent_utility,
                mi_wz: ev.mi_estimate,
                mi_exact: ev.mi_exact,
                u_p_zero_pay: zero_pay,
                fit_a: self.fit.a,
                fit_b: self.fit.b,
                fit_c: self.fit.c,
                fit_rho: self.fit.rho,
                fit_r2: self.fit.r2,
            })
            .collect()
    }
}

/// Exact Principal utility when every output is paid (almost surely) zero,
/// using the narrowest allowed pay noise.
pub fn zero_pay_principal_utility(config: &ContractConfig) -> Result<f64> {
    let schedule = PaySchedule::constant(&config.grid, 0.0, config.sigma_bounds.0);
    let utils = exact_expected_utilities(&schedule, &config.agent, &config.grid)?;
    let policy = quantal_response(&utils, config.agent.beta);
    exact_principal_utility(&schedule, &policy, &config.grid)
}

pub fn write_metrics_csv<W: Write>(history: &[BatchStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_csv<W: Write>(rows: &[ContractRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

