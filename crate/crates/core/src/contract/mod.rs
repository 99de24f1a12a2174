//! The one-shot pay-schedule game.
//!
//! The Principal posts a Gaussian pay schedule `W(z) = N(μ_z, σ_z)` over
//! output levels. A quantal-response Agent picks effort, output follows
//! effort with geometric noise, and pay is drawn from the schedule.

mod fit;
mod learn;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mi::MiDiscriminator;

pub use fit::{fit_mirrlees, mirrlees_curve, MirrleesFit};
pub use learn::{
    evaluate_schedule, learn_schedule, write_metrics_csv, write_results_csv, zero_pay_principal_utility, BatchStats,
    ContractConfig, ContractOutcome, ContractRow, Evaluation, Regularizer, SchedulePolicy,
};

/// Probability that output equals effort.
pub const P_EXACT: f64 = 0.7;
/// Geometric decay of output probability away from effort.
pub const DECAY: f64 = 0.7;

/// Output (and effort) levels `0..=z_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputGrid {
    z_max: usize,
}

impl OutputGrid {
    pub fn new(z_max: usize) -> Result<Self> {
        if z_max == 0 {
            return Err(Error::InvalidConfig("output grid needs at least two levels".into()));
        }
        Ok(Self { z_max })
    }

    pub fn len(&self) -> usize {
        self.z_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> usize {
        self.z_max
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> {
        0..=self.z_max
    }
}

impl Default for OutputGrid {
    fn default() -> Self {
        Self { z_max: 10 }
    }
}

/// `p(z | e)`: 0.7 at `z = e`, the remaining 0.3 spread geometrically in `|z − e|`.
pub fn output_distribution(effort: usize, grid: &OutputGrid) -> Result<Vec<f64>> {
    if effort > grid.max() {
        return Err(Error::OffGrid {
            grid: "effort",
            value: effort as f64,
        });
    }
    let weights: Vec<f64> = grid
        .levels()
        .map(|z| if z == effort { 0.0 } else { DECAY.powi(z.abs_diff(effort) as i32) })
        .collect();
    let norm: f64 = weights.iter().sum();
    Ok(weights
        .iter()
        .enumerate()
        .map(|(z, w)| if z == effort { P_EXACT } else { (1.0 - P_EXACT) * w / norm })
        .collect())
}

/// Offset CRRA utility: `((x+1)^{1−ρ} − 1)/(1−ρ)`, `ln(1+x)` at `ρ = 1`.
///
/// Negative income is clamped to zero with a warning.
pub fn crra(x: f64, rho: f64) -> f64 {
    let x = if x < 0.0 {
        log::warn!("negative income {x} clamped to 0");
        0.0
    } else {
        x
    };
    crra_nonneg(x, rho)
}

#[inline]
fn crra_nonneg(x: f64, rho: f64) -> f64 {
    if (rho - 1.0).abs() < 1e-12 {
        (1.0 + x).ln()
    } else if rho == 2.0 {
        x / (1.0 + x)
    } else {
        ((1.0 + x).powf(1.0 - rho) - 1.0) / (1.0 - rho)
    }
}

/// Agent rationality `β ≥ 0`; `f64::INFINITY` is the exact best response.
///
/// Serialized as a number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(pub f64);

impl Beta {
    pub const INFINITE: Beta = Beta(f64::INFINITY);

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn label(self) -> String {
        if self.is_infinite() {
            "inf".into()
        } else {
            format!("{}", self.0)
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v >= 0.0 => Ok(Beta(v)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Beta::INFINITE),
            Raw::Str(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0)
                .map(Beta)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid beta `{s}`"))),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("beta {v} must be >= 0"))),
        }
    }
}

/// Per-output Gaussian pay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaySchedule {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl PaySchedule {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        crate::error::check_len("pay schedule", mu.len(), sigma.len())?;
        if mu.iter().chain(&sigma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pay schedule"));
        }
        if sigma.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidConfig("pay std must be positive".into()));
        }
        Ok(Self { mu, sigma })
    }

    pub fn constant(grid: &OutputGrid, mu: f64, sigma: f64) -> Self {
        Self {
            mu: vec![mu; grid.len()],
            sigma: vec![sigma; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// `max_z μ_z − min_z μ_z`.
    pub fn range(&self) -> f64 {
        let max = self.mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.mu.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn sample<R: Rng + ?Sized>(&self, z: usize, rng: &mut R) -> f64 {
        Normal::new(self.mu[z], self.sigma[z]).expect("validated schedule").sample(rng)
    }
}

/// Gaussian differential entropy `½ ln(2πeσ²)`.
pub fn gaussian_entropy(sigma: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sigma * sigma).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantalAgent {
    pub beta: Beta,
    pub rho: f64,
    /// Disutility per unit of effort.
    pub effort_cost: f64,
    /// Pay draws per output level when estimating expected utility.
    pub samples: usize,
}

impl Default for QuantalAgent {
    fn default() -> Self {
        Self {
            beta: Beta::INFINITE,
            rho: 2.0,
            effort_cost: 0.03,
            samples: 100,
        }
    }
}

/// Softmax of `β·u`; at `β = ∞` a one-hot argmax with ties to the lowest index.
pub fn quantal_response(utilities: &[f64], beta: Beta) -> Vec<f64> {
    if beta.is_infinite() {
        let mut best = 0;
        for (i, u) in utilities.iter().enumerate() {
            if *u > utilities[best] {
                best = i;
            }
        }
        let mut out = vec![0.0; utilities.len()];
        out[best] = 1.0;
        return out;
    }
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = utilities.iter().map(|u| (beta.0 * (u - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Expected Agent utility of each effort, with income utility per output
/// level averaged over `agent.samples` pay draws.
pub fn expected_utilities<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    agent: &QuantalAgent,
    grid: &OutputGrid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    crate::error::check_len("pay schedule", grid.len(), schedule.len())?;
    let m = agent.samples.max(1);
    let income: Vec<f64> = grid
        .levels()
        .map(|z| (0..m).map(|_| crra_nonneg(schedule.sample(z, rng).max(0.0), agent.rho)).sum::<f64>() / m as f64)
        .collect();
    utilities_from_income(&income, agent, grid)
}

/// Same as [`expected_utilities`] but with income utility integrated numerically.
pub fn exact_expected_utilities(schedule: &PaySchedule, agent: &QuantalAgent, grid: &OutputGrid) -> Result<Vec<f64>> {
    crate::error::check_len("pay schedule", grid.len(), schedule.len())?;
    let income: Vec<f64> = grid
        .levels()
        .map(|z| gaussian_expectation(schedule.mu[z], schedule.sigma[z], |w| crra_nonneg(w.max(0.0), agent.rho)))
        .collect();
    utilities_from_income(&income, agent, grid)
}

fn utilities_from_income(income: &[f64], agent: &QuantalAgent, grid: &OutputGrid) -> Result<Vec<f64>> {
    grid.levels()
        .map(|e| {
            let p = output_distribution(e, grid)?;
            Ok(p.iter().zip(income).map(|(p, u)| p * u).sum::<f64>() - agent.effort_cost * e as f64)
        })
        .collect()
}

/// `π_a(e | W; β)` from Monte-Carlo expected utilities.
pub fn agent_policy<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    agent: &QuantalAgent,
    grid: &OutputGrid,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(quantal_response(&expected_utilities(schedule, agent, grid, rng)?, agent.beta))
}

/// `E[f(w)]` for `w ~ N(μ, σ)` by Simpson's rule over `μ ± 8σ`.
pub fn gaussian_expectation(mu: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    const N: usize = 2000;
    let (a, b) = (mu - 8.0 * sigma, mu + 8.0 * sigma);
    let h = (b - a) / N as f64;
    let mut total = 0.0;
    for i in 0..=N {
        let w = a + i as f64 * h;
        let coef = if i == 0 || i == N {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += coef * f(w) * crate::nn::normal_log_density(w, mu, sigma).exp();
    }
    total * h / 3.0
}

/// `E[max(w, 0)]` for `w ~ N(μ, σ)`.
pub fn expected_paid(mu: f64, sigma: f64) -> f64 {
    use statrs::function::erf::erf;
    let x = mu / sigma;
    let cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    mu * cdf + sigma * pdf
}

/// Marginal output distribution under an effort policy.
pub fn output_marginal(policy: &[f64], grid: &OutputGrid) -> Result<Vec<f64>> {
    let mut pz = vec![0.0; grid.len()];
    for (e, pe) in policy.iter().enumerate() {
        if *pe == 0.0 {
            continue;
        }
        for (z, p) in output_distribution(e, grid)?.iter().enumerate() {
            pz[z] += pe * p;
        }
    }
    Ok(pz)
}

/// Exact `E[z − max(w, 0)]` under an effort policy.
pub fn exact_principal_utility(schedule: &PaySchedule, policy: &[f64], grid: &OutputGrid) -> Result<f64> {
    let pz = output_marginal(policy, grid)?;
    Ok(pz
        .iter()
        .enumerate()
        .map(|(z, p)| p * (z as f64 - expected_paid(schedule.mu[z], schedule.sigma[z])))
        .sum())
}

/// `I(w; z)` in nats for the Gaussian mixture induced by the schedule and
/// output marginal, by numerical integration over `w`.
pub fn schedule_mutual_information(schedule: &PaySchedule, pz: &[f64]) -> f64 {
    let lo = (0..pz.len()).map(|z| schedule.mu[z] - 8.0 * schedule.sigma[z]).fold(f64::INFINITY, f64::min);
    let hi = (0..pz.len()).map(|z| schedule.mu[z] + 8.0 * schedule.sigma[z]).fold(f64::NEG_INFINITY, f64::max);
    let min_sigma = schedule.sigma.iter().copied().fold(f64::INFINITY, f64::min);
    let n = (((hi - lo) / (min_sigma / 20.0)).ceil() as usize).clamp(400, 200_000);
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let w = lo + i as f64 * h;
        let log_dens: Vec<f64> = (0..pz.len())
            .map(|z| crate::nn::normal_log_density(w, schedule.mu[z], schedule.sigma[z]))
            .collect();
        let terms: Vec<f64> = pz
            .iter()
            .zip(&log_dens)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p.ln() + l)
            .collect();
        let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            continue;
        }
        let log_mix = peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln();
        let weight = if i == 0 || i == n { 0.5 } else { 1.0 };
        for (p, l) in pz.iter().zip(&log_dens) {
            if *p > 0.0 {
                let d = l.exp();
                if d > 0.0 {
                    total += weight * p * d * (l - log_mix);
                }
            }
        }
    }
    (total * h).max(0.0)
}

/// One sampled outcome of the game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub effort: usize,
    pub output: usize,
    /// Raw schedule draw; the Principal pays `max(w, 0)`.
    pub wage: f64,
}

impl Outcome {
    pub fn paid(&self) -> f64 {
        self.wage.max(0.0)
    }

    pub fn principal_utility(&self) -> f64 {
        self.output as f64 - self.paid()
    }

    pub fn agent_utility(&self, agent: &QuantalAgent) -> f64 {
        crra_nonneg(self.paid(), agent.rho) - agent.effort_cost * self.effort as f64
    }
}

fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// `N` draws of `e ~ π_a`, `z ~ p(·|e)`, `w ~ W(z)`.
pub fn sample_outcomes<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    policy: &[f64],
    grid: &OutputGrid,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Outcome>> {
    let rows = grid.levels().map(|e| output_distribution(e, grid)).collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .map(|_| {
            let effort = draw_index(policy, rng);
            let output = draw_index(&rows[effort], rng);
            let wage = schedule.sample(output, rng);
            Outcome { effort, output, wage }
        })
        .collect())
}

/// Discriminator features for a `(w, z)` pair.
pub fn mi_features(outcome: &Outcome, grid: &OutputGrid) -> (Vec<f64>, Vec<f64>) {
    (vec![outcome.wage / 10.0], vec![outcome.output as f64 / grid.max() as f64])
}

/// N-sample RI reward and its samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSample {
    pub reward: f64,
    pub mean_principal_utility: f64,
    /// Mean pointwise `Ĩ(w; z)`, or mean schedule entropy for the entropy condition.
    pub mean_penalty: f64,
    pub outcomes: Vec<Outcome>,
}

/// `r̂ = mean(z − w − λ Ĩ(w; z))` over `n` sampled outcomes.
pub fn principal_reward<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    agent: &QuantalAgent,
    grid: &OutputGrid,
    lambda: f64,
    n: usize,
    discriminator: &MiDiscriminator,
    rng: &mut R,
) -> Result<RewardSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    let policy = agent_policy(schedule, agent, grid, rng)?;
    let outcomes = sample_outcomes(schedule, &policy, grid, n, rng)?;
    Ok(score_mi(outcomes, grid, lambda, discriminator))
}

pub(crate) fn score_mi(outcomes: Vec<Outcome>, grid: &OutputGrid, lambda: f64, discriminator: &MiDiscriminator) -> RewardSample {
    let n = outcomes.len() as f64;
    let up = outcomes.iter().map(Outcome::principal_utility).sum::<f64>() / n;
    let mi = outcomes
        .iter()
        .map(|o| {
            let (w, z) = mi_features(o, grid);
            discriminator.logit(&w, &z)
        })
        .sum::<f64>()
        / n;
    RewardSample {
        reward: up - lambda * mi,
        mean_principal_utility: up,
        mean_penalty: mi,
        outcomes,
    }
}

/// Entropy-regularized baseline: `r̂ = mean(z − w) + λ · mean H(W(z_n))`.
///
/// The entropy of the schedule is rewarded, as in maximum-entropy
/// regularization of a stochastic policy.
pub fn entropy_regularized_reward<R: Rng + ?Sized>(
    schedule: &PaySchedule,
    agent: &QuantalAgent,
    grid: &OutputGrid,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<RewardSample> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    let policy = agent_policy(schedule, agent, grid, rng)?;
    let outcomes = sample_outcomes(schedule, &policy, grid, n, rng)?;
    Ok(score_entropy(outcomes, schedule, lambda))
}

pub(crate) fn score_entropy(outcomes: Vec<Outcome>, schedule: &PaySchedule, lambda: f64) -> RewardSample {
    let n = outcomes.len() as f64;
    let up = outcomes.iter().map(Outcome::principal_utility).sum::<f64>() / n;
    let h = outcomes.iter().map(|o| gaussian_entropy(schedule.sigma[o.output])).sum::<f64>() / n;
    RewardSample {
        reward: up + lambda * h,
        mean_principal_utility: up,
        mean_penalty: h,
        outcomes,
    }
}
