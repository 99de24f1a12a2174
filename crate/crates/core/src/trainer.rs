//! Policy-gradient training of RIRL actors on attention-adjusted rewards.
//!
//! Each batch collects episodes, takes one step on every discriminator,
//! recomputes the pointwise penalties with the updated discriminators and
//! then takes one REINFORCE step per actor.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Adam, Parameterized, StepOutcome};
use crate::policy::{save_checkpoint, ActStep, ActorDiscriminators, Penalties, RirlActor};
use crate::rng::{self, streams, SimRng};

/// One actor's experience over one episode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Index of the actor that produced `steps`.
    pub actor: usize,
    pub steps: Vec<ActStep>,
    /// Raw utilities `u_t`.
    pub utilities: Vec<f64>,
    pub penalties: Vec<Penalties>,
    /// `û_t = u_t − Σ_k λ_k Ĩ_k − λ_ω Ĩ_ω`, before reward scaling.
    pub ri_utilities: Vec<f64>,
    /// Discounted returns of the (possibly scaled) RI utilities.
    pub returns: Vec<f64>,
    /// Optional split of each raw utility into one component per action
    /// head, `head_utilities[t][j]`, for per-head credit assignment.
    pub head_utilities: Option<Vec<Vec<f64>>>,
    /// Discounted returns of each head's component, `head_returns[t][j]`.
    pub head_returns: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn new(actor: usize, steps: Vec<ActStep>, utilities: Vec<f64>) -> Self {
        Self {
            actor,
            steps,
            utilities,
            penalties: Vec::new(),
            ri_utilities: Vec::new(),
            returns: Vec::new(),
            head_utilities: None,
            head_returns: None,
        }
    }

    /// Attaches per-head utility components; each row should sum to the utility.
    pub fn with_head_utilities(mut self, head_utilities: Vec<Vec<f64>>) -> Self {
        self.head_utilities = Some(head_utilities);
        self
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A multi-actor episodic environment.
pub trait Environment {
    /// Names of the actors, in the order `rollout` expects them.
    fn actor_names(&self) -> Vec<String>;

    fn horizon(&self) -> usize;

    /// Plays one episode and returns every actor's trajectory. An actor
    /// shared by several players contributes one trajectory per player.
    fn rollout(&mut self, actors: &[RirlActor], rng: &mut SimRng) -> Result<Vec<Trajectory>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub policy_lr: f64,
    pub discriminator_lr: f64,
    /// Episodes per batch.
    pub batch_size: usize,
    pub batches: usize,
    pub gamma: f64,
    /// Per-batch increment of every effective λ towards its target.
    pub anneal_rate: f64,
    pub seed: u64,
    /// Divide per-step rewards by the horizon.
    pub scale_rewards: bool,
    pub entropy_coef: f64,
    pub baseline: Baseline,
    /// Divide advantages by their batch standard deviation.
    pub normalize_advantages: bool,
    /// Per-head credit assignment where the environment splits utilities.
    pub head_credit: bool,
    pub discriminator_hidden: Vec<usize>,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Half-open batch ranges during which the named actor is held fixed
    /// while the others learn.
    pub frozen: BTreeMap<String, Vec<(usize, usize)>>,
    /// Per-actor learning rates overriding `policy_lr`.
    pub actor_lr: BTreeMap<String, f64>,
    /// Per-actor entropy coefficients overriding `entropy_coef`.
    pub actor_entropy: BTreeMap<String, f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            policy_lr: 1e-4,
            discriminator_lr: 1e-3,
            batch_size: 512,
            batches: 60_000,
            gamma: 1.0,
            anneal_rate: 4.0 / 10_000.0,
            seed: 0,
            scale_rewards: true,
            entropy_coef: 0.01,
            baseline: Baseline::Mean,
            normalize_advantages: false,
            head_credit: false,
            discriminator_hidden: crate::mi::DEFAULT_HIDDEN.to_vec(),
            checkpoint_every: None,
            checkpoint_dir: None,
            frozen: BTreeMap::new(),
            actor_lr: BTreeMap::new(),
            actor_entropy: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.anneal_rate <= 0.0 || !self.anneal_rate.is_finite() {
            return Err(Error::InvalidConfig("anneal rate must be positive".into()));
        }
        if self.policy_lr < 0.0 || self.discriminator_lr < 0.0 {
            return Err(Error::InvalidConfig("learning rates must be >= 0".into()));
        }
        if self.actor_lr.values().any(|lr| !(*lr >= 0.0)) {
            return Err(Error::InvalidConfig("learning rates must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Entropy coefficient at `batch`: constant, then linearly to zero over the last third.
    pub fn entropy_coef_at(&self, batch: usize) -> f64 {
        self.entropy_coef * fade(batch, self.batches)
    }

    /// Entropy coefficient of the named actor at `batch`. The fade runs over
    /// the last third of the batches in which the actor is not frozen.
    pub fn actor_entropy_at(&self, actor: &str, batch: usize) -> f64 {
        let coef = self.actor_entropy.get(actor).copied().unwrap_or(self.entropy_coef);
        let Some(spans) = self.frozen.get(actor) else {
            return coef * fade(batch, self.batches);
        };
        // Spans are assumed disjoint.
        let frozen_before = |end: usize| -> usize { spans.iter().map(|&(a, b)| b.min(end).saturating_sub(a)).sum() };
        let active = self.batches - frozen_before(self.batches);
        coef * fade(batch - frozen_before(batch), active)
    }

    pub fn is_frozen(&self, actor: &str, batch: usize) -> bool {
        self.frozen
            .get(actor)
            .is_some_and(|spans| spans.iter().any(|&(a, b)| (a..b).contains(&batch)))
    }
}

fn fade(step: usize, total: usize) -> f64 {
    let start = total * 2 / 3;
    if step < start || total == 0 {
        return 1.0;
    }
    let span = (total - start).max(1) as f64;
    (1.0 - (step - start) as f64 / span).max(0.0)
}

/// `R̂_t = Σ_k γ^k r_{t+k}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `min(target, batch · rate)`.
pub fn anneal_lambda(batch: usize, target: f64, rate: f64) -> f64 {
    target.min(batch as f64 * rate)
}

/// Effective attention costs of one actor at some batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas {
    pub channels: Vec<f64>,
    pub decoder: f64,
}

impl Lambdas {
    pub fn annealed(actor: &RirlActor, batch: usize, rate: f64) -> Self {
        Self {
            channels: actor.channels().iter().map(|c| anneal_lambda(batch, c.cost, rate)).collect(),
            decoder: anneal_lambda(batch, actor.config().decoder_cost, rate),
        }
    }
}

/// Fills penalties, RI utilities and returns of a trajectory.
pub fn score_trajectory(
    traj: &mut Trajectory,
    discriminators: &ActorDiscriminators,
    lambdas: &Lambdas,
    gamma: f64,
    reward_scale: f64,
) {
    traj.penalties = traj.steps.iter().map(|s| discriminators.attention_penalties(s)).collect();
    traj.ri_utilities = traj
        .utilities
        .iter()
        .zip(&traj.penalties)
        .map(|(u, p)| u - p.cost(&lambdas.channels, lambdas.decoder))
        .collect();
    let scaled: Vec<f64> = traj.ri_utilities.iter().map(|u| u * reward_scale).collect();
    traj.returns = discounted_returns(&scaled, gamma);
    traj.head_returns = traj.head_utilities.as_ref().map(|hu| {
        let heads = hu.first().map_or(0, Vec::len);
        let per_head: Vec<Vec<f64>> = (0..heads)
            .map(|j| {
                let r: Vec<f64> = hu.iter().map(|row| row[j] * reward_scale).collect();
                discounted_returns(&r, gamma)
            })
            .collect();
        (0..hu.len()).map(|t| per_head.iter().map(|r| r[t]).collect()).collect()
    });
}

/// How advantages are centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Batch mean return at each timestep.
    #[default]
    Mean,
    /// Ridge regression of returns on the timestep and the raw observations
    /// (linear and squared terms), refit every batch.
    Linear,
}

/// Settings of one policy-gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientOptions {
    pub entropy_coef: f64,
    pub baseline: Baseline,
    /// Divide advantages by their batch standard deviation.
    pub normalize: bool,
    /// Weight each action head by the returns of its own utility component
    /// when trajectories carry one.
    pub head_credit: bool,
}

impl GradientOptions {
    pub fn plain(entropy_coef: f64) -> Self {
        Self {
            entropy_coef,
            baseline: Baseline::Mean,
            normalize: false,
            head_credit: false,
        }
    }
}

fn mean_baseline(returns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let horizon = returns.iter().map(Vec::len).max().unwrap_or(0);
    let mut sums = vec![0.0; horizon];
    let mut counts = vec![0usize; horizon];
    for ret in returns {
        for (t, r) in ret.iter().enumerate() {
            sums[t] += r;
            counts[t] += 1;
        }
    }
    let b: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect();
    returns.iter().map(|r| b[..r.len()].to_vec()).collect()
}

fn baseline_features(step: &ActStep, t: usize, horizon: usize) -> Vec<f64> {
    let mut f = vec![1.0];
    f.extend((1..horizon).map(|k| if k == t { 1.0 } else { 0.0 }));
    let obs = step.channels.iter().flat_map(|c| c.obs.iter().copied());
    for x in obs {
        f.push(x);
        f.push(x * x);
    }
    f
}

fn linear_baseline(trajectories: &[&Trajectory], returns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let horizon = trajectories.iter().map(|t| t.len()).max().unwrap_or(0);
    let Some(first) = trajectories.iter().find(|t| !t.is_empty()) else {
        return trajectories.iter().map(|_| Vec::new()).collect();
    };
    let d = baseline_features(&first.steps[0], 0, horizon).len();
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    let mut rows = 0usize;
    for (traj, ret) in trajectories.iter().zip(returns) {
        for (t, (step, r)) in traj.steps.iter().zip(ret).enumerate() {
            let f = baseline_features(step, t, horizon);
            for i in 0..d {
                xty[i] += f[i] * r;
                for j in 0..d {
                    xtx[i][j] += f[i] * f[j];
                }
            }
            rows += 1;
        }
    }
    let ridge = 1e-3 * rows.max(1) as f64;
    for (i, row) in xtx.iter_mut().enumerate().skip(1) {
        row[i] += ridge;
    }
    match solve(xtx, xty) {
        Some(coef) => trajectories
            .iter()
            .map(|traj| {
                traj.steps
                    .iter()
                    .enumerate()
                    .map(|(t, s)| baseline_features(s, t, horizon).iter().zip(&coef).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect(),
        None => mean_baseline(returns),
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-12) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn centered(trajectories: &[&Trajectory], returns: &[Vec<f64>], baseline: Baseline, normalize: bool) -> Vec<Vec<f64>> {
    let b = match baseline {
        Baseline::Mean => mean_baseline(returns),
        Baseline::Linear => linear_baseline(trajectories, returns),
    };
    let mut adv: Vec<Vec<f64>> = returns
        .iter()
        .zip(&b)
        .map(|(r, b)| r.iter().zip(b).map(|(r, b)| r - b).collect())
        .collect();
    if normalize {
        let (sq, n) = adv.iter().flatten().fold((0.0, 0usize), |(s, n), a| (s + a * a, n + 1));
        let sd = (sq / n.max(1) as f64).sqrt();
        for a in adv.iter_mut().flatten() {
            *a /= sd + 1e-8;
        }
    }
    adv
}

/// Advantages `R̂_t − b_t` per trajectory.
pub fn advantages(trajectories: &[&Trajectory], baseline: Baseline, normalize: bool) -> Vec<Vec<f64>> {
    let returns: Vec<Vec<f64>> = trajectories.iter().map(|t| t.returns.clone()).collect();
    centered(trajectories, &returns, baseline, normalize)
}

/// Per-head advantages `[traj][t][head]`, or `None` unless every trajectory
/// carries per-head returns.
pub fn head_advantages(trajectories: &[&Trajectory], baseline: Baseline, normalize: bool) -> Option<Vec<Vec<Vec<f64>>>> {
    let per_traj: Vec<&Vec<Vec<f64>>> = trajectories.iter().map(|t| t.head_returns.as_ref()).collect::<Option<_>>()?;
    let heads = per_traj.iter().flat_map(|r| r.first()).map(Vec::len).next()?;
    let by_head: Vec<Vec<Vec<f64>>> = (0..heads)
        .map(|j| {
            let returns: Vec<Vec<f64>> = per_traj.iter().map(|r| r.iter().map(|row| row[j]).collect()).collect();
            centered(trajectories, &returns, baseline, false)
        })
        .collect();
    let mut out: Vec<Vec<Vec<f64>>> = per_traj
        .iter()
        .enumerate()
        .map(|(k, r)| (0..r.len()).map(|t| by_head.iter().map(|h| h[k][t]).collect()).collect())
        .collect();
    if normalize {
        let (sq, n) = out.iter().flatten().flatten().fold((0.0, 0usize), |(s, n), a| (s + a * a, n + 1));
        let sd = (sq / n.max(1) as f64).sqrt();
        for a in out.iter_mut().flatten().flatten() {
            *a /= sd + 1e-8;
        }
    }
    Some(out)
}

/// One ascent step on `Σ_t log π_t (R̂_t − b_t) + c·H(ω_t)` averaged over
/// `trajectories`. With `head_credit`, each action head is weighted by the
/// advantage of its own utility component instead.
///
/// Returns the mean episode return before the update.
pub fn policy_gradient_step(
    actor: &mut RirlActor,
    trajectories: &[&Trajectory],
    optimizer: &mut Adam,
    options: GradientOptions,
) -> Result<f64> {
    if trajectories.is_empty() {
        return Ok(0.0);
    }
    let n = trajectories.len() as f64;
    let adv = advantages(trajectories, options.baseline, options.normalize);
    let heads = if options.head_credit {
        head_advantages(trajectories, options.baseline, options.normalize)
    } else {
        None
    };
    actor.zero_grad();
    for (k, (traj, adv)) in trajectories.iter().zip(&adv).enumerate() {
        let ent = vec![options.entropy_coef; traj.len()];
        // Adam descends, so accumulate the gradient of −J.
        match &heads {
            Some(h) => actor.accumulate_split_gradients(&traj.steps, &h[k], adv, &ent, -1.0 / n),
            None => actor.accumulate_gradients(&traj.steps, adv, &ent, -1.0 / n),
        }
    }
    if optimizer.step(actor)? == StepOutcome::Skipped {
        log::warn!("policy gradient skipped after non-finite gradient");
    }
    Ok(trajectories.iter().map(|t| t.returns.first().copied().unwrap_or(0.0)).sum::<f64>() / n)
}

/// Per-batch, per-actor metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub batch: usize,
    pub actor: String,
    /// Mean episode sum of raw utilities.
    pub mean_utility: f64,
    /// Mean episode sum of RI utilities (unscaled).
    pub mean_ri_utility: f64,
    /// `(channel name, mean Ĩ, effective λ)`; Ĩ is `None` when unmeasured.
    pub channels: Vec<(String, Option<f64>, f64)>,
    /// Mean decision entropy of ω.
    pub entropy: f64,
    pub seed: u64,
}

pub struct TrainOutcome {
    pub actors: Vec<RirlActor>,
    pub discriminators: Vec<ActorDiscriminators>,
    pub metrics: Vec<MetricRow>,
}

fn summarize(batch: usize, name: &str, actor: &RirlActor, trajs: &[&Trajectory], lambdas: &Lambdas, seed: u64) -> MetricRow {
    let n = trajs.len().max(1) as f64;
    let mean_utility = trajs.iter().map(|t| t.utilities.iter().sum::<f64>()).sum::<f64>() / n;
    let mean_ri_utility = trajs.iter().map(|t| t.ri_utilities.iter().sum::<f64>()).sum::<f64>() / n;
    let steps: usize = trajs.iter().map(|t| t.len()).sum();
    let mut channels = Vec::new();
    for (k, spec) in actor.channels().iter().enumerate() {
        let mut total = 0.0;
        let mut count = 0usize;
        for t in trajs {
            for p in &t.penalties {
                if let Some(v) = p.channels[k] {
                    total += v;
                    count += 1;
                }
            }
        }
        let mi = (count > 0).then(|| total / count as f64);
        channels.push((spec.name.clone(), mi, lambdas.channels[k]));
    }
    let entropy = trajs
        .iter()
        .flat_map(|t| t.steps.iter().map(ActStep::decoder_entropy))
        .sum::<f64>()
        / steps.max(1) as f64;
    MetricRow {
        batch,
        actor: name.to_string(),
        mean_utility,
        mean_ri_utility,
        channels,
        entropy,
        seed,
    }
}

fn dump_divergence(dir: Option<&Path>, batch: usize, detail: &str) {
    if let Some(dir) = dir {
        let path = dir.join("divergence.txt");
        if let Err(e) = fs::write(&path, format!("batch {batch}\n{detail}\n")) {
            log::error!("could not write divergence dump {}: {e}", path.display());
        }
    }
}

/// Trains `actors` in `env` for `config.batches` batches.
pub fn train<E: Environment>(config: &TrainConfig, env: &mut E, mut actors: Vec<RirlActor>) -> Result<TrainOutcome> {
    config.validate()?;
    let names = env.actor_names();
    if names.len() != actors.len() {
        return Err(Error::InvalidConfig(format!(
            "environment expects {} actors, got {}",
            names.len(),
            actors.len()
        )));
    }
    let mut init_rng = rng::stream(config.seed, streams::DISCRIMINATOR);
    let mut discs: Vec<ActorDiscriminators> = actors
        .iter()
        .map(|a| ActorDiscriminators::new(a, &config.discriminator_hidden, config.discriminator_lr, &mut init_rng))
        .collect();
    let mut optimizers: Vec<Adam> = names
        .iter()
        .map(|n| Adam::new(config.actor_lr.get(n).copied().unwrap_or(config.policy_lr)))
        .collect();
    let mut rollout_rng = rng::stream(config.seed, streams::ROLLOUT);
    let mut disc_rng = rng::stream(config.seed.wrapping_add(1 << 32), streams::DISCRIMINATOR);
    let scale = if config.scale_rewards {
        1.0 / env.horizon().max(1) as f64
    } else {
        1.0
    };
    let mut metrics = Vec::new();
    for batch in 0..config.batches {
        let mut trajs = Vec::new();
        for _ in 0..config.batch_size {
            trajs.extend(env.rollout(&actors, &mut rollout_rng)?);
        }
        if let Some(bad) = trajs.iter().find(|t| t.utilities.iter().any(|u| !u.is_finite())) {
            let detail = format!("actor {} utilities {:?}", names[bad.actor], bad.utilities);
            dump_divergence(config.checkpoint_dir.as_deref(), batch, &detail);
            return Err(Error::Divergence { batch, detail });
        }
        for (a, disc) in discs.iter_mut().enumerate() {
            if disc.is_empty() {
                continue;
            }
            let steps: Vec<&ActStep> = trajs.iter().filter(|t| t.actor == a).flat_map(|t| t.steps.iter()).collect();
            disc.train_on(&steps, &mut disc_rng)?;
        }
        let lambdas: Vec<Lambdas> = actors.iter().map(|a| Lambdas::annealed(a, batch, config.anneal_rate)).collect();
        for traj in &mut trajs {
            score_trajectory(traj, &discs[traj.actor], &lambdas[traj.actor], config.gamma, scale);
        }
        for (a, actor) in actors.iter_mut().enumerate() {
            let mine: Vec<&Trajectory> = trajs.iter().filter(|t| t.actor == a).collect();
            metrics.push(summarize(batch, &names[a], actor, &mine, &lambdas[a], config.seed));
            if config.is_frozen(&names[a], batch) {
                continue;
            }
            let mean_return = policy_gradient_step(
                actor,
                &mine,
                &mut optimizers[a],
                GradientOptions {
                    entropy_coef: config.actor_entropy_at(&names[a], batch),
                    baseline: config.baseline,
                    normalize: config.normalize_advantages,
                    head_credit: config.head_credit,
                },
            )?;
            if !mean_return.is_finite() {
                let detail = format!("actor {} mean return {mean_return}", names[a]);
                dump_divergence(config.checkpoint_dir.as_deref(), batch, &detail);
                return Err(Error::Divergence { batch, detail });
            }
        }
        if let (Some(every), Some(dir)) = (config.checkpoint_every, &config.checkpoint_dir) {
            if every > 0 && (batch + 1) % every == 0 {
                write_checkpoints(dir, &names, &actors)?;
            }
        }
    }
    if let Some(dir) = &config.checkpoint_dir {
        write_checkpoints(dir, &names, &actors)?;
    }
    Ok(TrainOutcome {
        actors,
        discriminators: discs,
        metrics,
    })
}

fn write_checkpoints(dir: &Path, names: &[String], actors: &[RirlActor]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, actor) in names.iter().zip(actors) {
        save_checkpoint(actor, &dir.join(format!("{name}.ckpt")))?;
    }
    Ok(())
}

/// Writes metric rows as CSV. Channel columns are the union over actors,
/// `mi_<channel>` and `lambda_<channel>`, blank where not applicable.
pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    for row in rows {
        for (name, _, _) in &row.channels {
            if !names.contains(name) {
                names.push(name.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["batch".to_string(), "actor".into(), "mean_utility".into(), "mean_RI_utility".into()];
    header.extend(names.iter().map(|n| format!("mi_{n}")));
    header.extend(names.iter().map(|n| format!("lambda_{n}")));
    header.extend(["entropy".to_string(), "seed".to_string()]);
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.batch.to_string(),
            row.actor.clone(),
            row.mean_utility.to_string(),
            row.mean_ri_utility.to_string(),
        ];
        let find = |n: &String| row.channels.iter().find(|(c, _, _)| c == n);
        for n in &names {
            rec.push(find(n).and_then(|c| c.1).map(|v| v.to_string()).unwrap_or_default());
        }
        for n in &names {
            rec.push(find(n).map(|c| c.2.to_string()).unwrap_or_default());
        }
        rec.push(row.entropy.to_string());
        rec.push(row.seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
