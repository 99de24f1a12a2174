//! The sequential team setting: a Principal sets a wage for each Agent, then
//! every Agent chooses hours and effort.
//!
//! Output is `z_i = h_i (ν_i + e_i)` where `ν_i` is a hidden ability drawn at
//! reset. The Principal earns `Σ z_i − Σ w_i h_i`; Agent `i` earns
//! `crra(w_i h_i) − c_l h_i^α (1 + e_i)`.
//!
//! The Principal's wages for step `t` are computed from what it saw of step
//! `t − 1` (zeros at `t = 0`): a free channel with the timestep, hours and
//! total output, and two costly channels with individual outputs and efforts.

mod run;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contract::crra;
use crate::error::{Error, Result};
use crate::policy::{ActStep, ActorConfig, ChannelSpec, RirlActor, DEFAULT_LOW_NOISE_OFFSET};
use crate::rng::{self, streams, SimRng};
use crate::trainer::{Environment, Trajectory};

pub use run::{learn_team, read_episode_csv, write_episode_csv, EpisodeRow, TeamOutcome, TeamRunConfig};

/// Channel order of the Principal actor.
pub const FREE: usize = 0;
pub const OUTPUT: usize = 1;
pub const EFFORT: usize = 2;

const HOURS_SCALE: f64 = 8.0;
const OUTPUT_SCALE: f64 = 20.0;
const TOTAL_SCALE: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeamConfig {
    pub n_agents: usize,
    pub horizon: usize,
    pub wage_step: f64,
    pub wage_levels: usize,
    pub max_hours: usize,
    pub max_effort: usize,
    pub abilities: Vec<f64>,
    /// CRRA coefficient of the Agent's income utility.
    pub rho: f64,
    pub labor_cost: f64,
    pub labor_exponent: f64,
    pub lambda_z: f64,
    pub lambda_e: f64,
    /// Appends the current abilities (one-hot) to the free channel. Used by the
    /// single-step brute-force comparison, where nothing else reveals them.
    pub reveal_ability: bool,
}

impl Default for TeamConfig {
    fn default() -> Self {
        Self {
            n_agents: 4,
            horizon: 5,
            wage_step: 0.5,
            wage_levels: 11,
            max_hours: 8,
            max_effort: 2,
            abilities: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            rho: 0.1,
            labor_cost: 0.2,
            labor_exponent: 2.0,
            lambda_z: 0.0,
            lambda_e: 0.0,
            reveal_ability: false,
        }
    }
}

impl TeamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_agents == 0 || self.horizon == 0 {
            return bad("team needs at least one agent and one timestep");
        }
        if self.wage_levels < 2 || !(self.wage_step > 0.0) {
            return bad("wage grid needs two levels and a positive step");
        }
        if self.abilities.is_empty() || self.abilities.iter().any(|v| !v.is_finite()) {
            return bad("abilities must be finite and nonempty");
        }
        if self.lambda_z < 0.0 || self.lambda_e < 0.0 {
            return bad("attention costs must be nonnegative");
        }
        if !(self.labor_cost >= 0.0) || !(self.labor_exponent > 0.0) || !(self.rho >= 0.0) {
            return bad("utility constants out of range");
        }
        Ok(())
    }

    pub fn wages(&self) -> Vec<f64> {
        (0..self.wage_levels).map(|i| i as f64 * self.wage_step).collect()
    }

    pub fn wage(&self, index: usize) -> f64 {
        index as f64 * self.wage_step
    }

    fn max_ability(&self) -> f64 {
        self.abilities.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn max_wage(&self) -> f64 {
        self.wage(self.wage_levels - 1)
    }

    pub fn wage_index(&self, w: f64) -> Result<usize> {
        let i = (w / self.wage_step).round();
        if i < 0.0 || i as usize >= self.wage_levels || (i * self.wage_step - w).abs() > 1e-9 {
            return Err(Error::OffGrid { grid: "wage", value: w });
        }
        Ok(i as usize)
    }

    pub fn agent_utility(&self, wage: f64, hours: usize, effort: usize) -> f64 {
        let h = hours as f64;
        crra(wage * h, self.rho) - self.labor_cost * h.powf(self.labor_exponent) * (1.0 + effort as f64)
    }

    fn free_width(&self) -> usize {
        let revealed = if self.reveal_ability {
            self.n_agents * self.abilities.len()
        } else {
            0
        };
        2 + self.n_agents + revealed
    }

    pub fn principal_config(&self) -> ActorConfig {
        let n = self.n_agents;
        ActorConfig::new(
            vec![
                ChannelSpec::new("free", self.free_width(), 0.0),
                ChannelSpec::new("z", n, self.lambda_z).measured(),
                ChannelSpec::new("e", n, self.lambda_e).measured(),
            ],
            vec![self.wage_levels; n],
        )
    }

    pub fn agent_config(&self) -> ActorConfig {
        ActorConfig::new(vec![ChannelSpec::new("own", 5 + self.wage_levels, 0.0)], vec![self.max_hours + 1, self.max_effort + 1])
    }
}

/// Environment state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamState {
    pub t: usize,
    pub horizon: usize,
    pub abilities: Vec<f64>,
    pub wages: Vec<f64>,
    pub hours: Vec<usize>,
    pub efforts: Vec<usize>,
    pub outputs: Vec<f64>,
}

impl TeamState {
    pub fn sample<R: Rng + ?Sized>(config: &TeamConfig, rng: &mut R) -> Self {
        let n = config.n_agents;
        let abilities = (0..n)
            .map(|_| config.abilities[rng.random_range(0..config.abilities.len())])
            .collect();
        Self {
            t: 0,
            horizon: config.horizon,
            abilities,
            wages: vec![0.0; n],
            hours: vec![0; n],
            efforts: vec![0; n],
            outputs: vec![0.0; n],
        }
    }

    pub fn total_output(&self) -> f64 {
        self.outputs.iter().sum()
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.horizon
    }
}

/// Draws fresh abilities from the seed's environment stream.
pub fn reset(config: &TeamConfig, seed: u64) -> TeamState {
    TeamState::sample(config, &mut rng::stream(seed, streams::ENV))
}

/// Utilities produced by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUtilities {
    pub principal: f64,
    pub agents: Vec<f64>,
}

/// Applies wages, hours and efforts and advances `state.t`.
pub fn step(
    config: &TeamConfig,
    state: &mut TeamState,
    wages: &[f64],
    hours: &[usize],
    efforts: &[usize],
) -> Result<StepUtilities> {
    let n = config.n_agents;
    crate::error::check_len("team wages", n, wages.len())?;
    crate::error::check_len("team hours", n, hours.len())?;
    crate::error::check_len("team efforts", n, efforts.len())?;
    if state.is_done() {
        return Err(Error::InvalidConfig("step after the final timestep".into()));
    }
    for &w in wages {
        config.wage_index(w)?;
    }
    if let Some(&h) = hours.iter().find(|&&h| h > config.max_hours) {
        return Err(Error::OffGrid { grid: "hours", value: h as f64 });
    }
    if let Some(&e) = efforts.iter().find(|&&e| e > config.max_effort) {
        return Err(Error::OffGrid { grid: "effort", value: e as f64 });
    }
    let mut principal = 0.0;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let z = hours[i] as f64 * (state.abilities[i] + efforts[i] as f64);
        state.outputs[i] = z;
        principal += z - wages[i] * hours[i] as f64;
        agents.push(config.agent_utility(wages[i], hours[i], efforts[i]));
    }
    state.wages.copy_from_slice(wages);
    state.hours.copy_from_slice(hours);
    state.efforts.copy_from_slice(efforts);
    state.t += 1;
    Ok(StepUtilities { principal, agents })
}

/// `û_p = u_p − λ^z Ĩ^z − λ^e Ĩ^e`; the free channel is never charged.
pub fn principal_ri_reward(u_p: f64, mi_z: f64, mi_e: f64, lambda_z: f64, lambda_e: f64) -> f64 {
    u_p - lambda_z * mi_z - lambda_e * mi_e
}

/// Principal observations for the decision at `state.t`, built from the
/// outcomes of the previous step.
pub fn principal_observation(config: &TeamConfig, state: &TeamState) -> Vec<Vec<f64>> {
    let n = config.n_agents;
    let first = state.t == 0;
    let prev = |v: f64| if first { 0.0 } else { v };
    let mut free = Vec::with_capacity(config.free_width());
    free.push(state.t as f64 / config.horizon as f64);
    free.extend(state.hours.iter().map(|&h| prev(h as f64 / HOURS_SCALE)));
    free.push(prev(state.total_output() / TOTAL_SCALE));
    if config.reveal_ability {
        for v in &state.abilities {
            free.extend(config.abilities.iter().map(|a| if a == v { 1.0 } else { 0.0 }));
        }
    }
    let z = (0..n).map(|i| prev(state.outputs[i] / OUTPUT_SCALE)).collect();
    let e = (0..n)
        .map(|i| prev(state.efforts[i] as f64 / config.max_effort.max(1) as f64))
        .collect();
    vec![free, z, e]
}

/// Agent `i`'s observation: own wage and ability, timestep, own last action.
pub fn agent_observation(config: &TeamConfig, state: &TeamState, i: usize, wage: f64) -> Vec<Vec<f64>> {
    let first = state.t == 0;
    let (h, e) = if first {
        (0.0, 0.0)
    } else {
        (state.hours[i] as f64, state.efforts[i] as f64)
    };
    let mut obs = vec![
        wage / config.max_wage(),
        state.abilities[i] / config.max_ability(),
        state.t as f64 / config.horizon as f64,
        h / HOURS_SCALE,
        e / config.max_effort.max(1) as f64,
    ];
    // The wage also enters one-hot so responses at neighbouring wages are learned separately.
    let k = (wage / config.wage_step).round() as usize;
    obs.extend((0..config.wage_levels).map(|j| if j == k { 1.0 } else { 0.0 }));
    vec![obs]
}

/// One played episode with every actor's decision steps.
#[derive(Debug, Clone)]
pub struct Episode {
    pub abilities: Vec<f64>,
    pub wages: Vec<Vec<f64>>,
    pub hours: Vec<Vec<usize>>,
    pub efforts: Vec<Vec<usize>>,
    pub outputs: Vec<Vec<f64>>,
    pub principal_utility: Vec<f64>,
    /// `agent_utility[i][t]`.
    pub agent_utility: Vec<Vec<f64>>,
    pub principal_steps: Vec<ActStep>,
    pub agent_steps: Vec<Vec<ActStep>>,
}

impl Episode {
    pub fn horizon(&self) -> usize {
        self.principal_steps.len()
    }
}

pub fn play_episode(config: &TeamConfig, principal: &RirlActor, agent: &RirlActor, rng: &mut SimRng) -> Result<Episode> {
    let n = config.n_agents;
    let mut state = TeamState::sample(config, rng);
    let mut ep = Episode {
        abilities: state.abilities.clone(),
        wages: Vec::new(),
        hours: Vec::new(),
        efforts: Vec::new(),
        outputs: Vec::new(),
        principal_utility: Vec::new(),
        agent_utility: vec![Vec::new(); n],
        principal_steps: Vec::new(),
        agent_steps: vec![Vec::new(); n],
    };
    let mut p_hidden = principal.initial_state();
    let mut a_hidden = vec![agent.initial_state(); n];
    while !state.is_done() {
        let p_step = principal.act(&principal_observation(config, &state), &p_hidden, rng)?;
        let wages: Vec<f64> = p_step.actions.iter().map(|&a| config.wage(a)).collect();
        let mut hours = Vec::with_capacity(n);
        let mut efforts = Vec::with_capacity(n);
        for i in 0..n {
            let a_step = agent.act(&agent_observation(config, &state, i, wages[i]), &a_hidden[i], rng)?;
            hours.push(a_step.actions[0]);
            efforts.push(a_step.actions[1]);
            a_hidden[i] = a_step.hidden_after.clone();
            ep.agent_steps[i].push(a_step);
        }
        p_hidden = p_step.hidden_after.clone();
        ep.principal_steps.push(p_step);
        let u = step(config, &mut state, &wages, &hours, &efforts)?;
        ep.wages.push(wages);
        ep.hours.push(hours);
        ep.efforts.push(efforts);
        ep.outputs.push(state.outputs.clone());
        ep.principal_utility.push(u.principal);
        for (i, ua) in u.agents.into_iter().enumerate() {
            ep.agent_utility[i].push(ua);
        }
    }
    Ok(ep)
}

/// The team game as a two-actor environment: the Principal, then one
/// Agent policy shared by every Agent.
#[derive(Debug, Clone)]
pub struct TeamEnv {
    pub config: TeamConfig,
}

impl TeamEnv {
    pub fn new(config: TeamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    /// Fresh Principal and Agent actors with low initial encoder noise.
    pub fn actors(&self, sizes: (usize, usize, usize), seed: u64) -> Result<Vec<RirlActor>> {
        let mut init = rng::stream(seed, streams::INIT);
        let (enc, rec, dec) = sizes;
        let mut principal = RirlActor::new(self.config.principal_config().with_sizes(enc, rec, dec), &mut init)?;
        let mut agent = RirlActor::new(self.config.agent_config().with_sizes(enc, rec, dec), &mut init)?;
        principal.init_low_noise(DEFAULT_LOW_NOISE_OFFSET);
        agent.init_low_noise(DEFAULT_LOW_NOISE_OFFSET);
        Ok(vec![principal, agent])
    }
}

impl Environment for TeamEnv {
    fn actor_names(&self) -> Vec<String> {
        vec!["principal".into(), "agent".into()]
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn rollout(&mut self, actors: &[RirlActor], rng: &mut SimRng) -> Result<Vec<Trajectory>> {
        let ep = play_episode(&self.config, &actors[0], &actors[1], rng)?;
        let mut out = Vec::with_capacity(1 + self.config.n_agents);
        let n = self.config.n_agents;
        let split: Vec<Vec<f64>> = (0..ep.horizon())
            .map(|t| (0..n).map(|i| ep.outputs[t][i] - ep.wages[t][i] * ep.hours[t][i] as f64).collect())
            .collect();
        out.push(Trajectory::new(0, ep.principal_steps, ep.principal_utility).with_head_utilities(split));
        for (steps, utils) in ep.agent_steps.into_iter().zip(ep.agent_utility) {
            out.push(Trajectory::new(1, steps, utils));
        }
        Ok(out)
    }
}

/// Exact best response `(hours, effort)` to a wage in a single-step game;
/// ties go to fewer hours, then less effort.
pub fn best_response(config: &TeamConfig, wage: f64) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_u = f64::NEG_INFINITY;
    for h in 0..=config.max_hours {
        for e in 0..=config.max_effort {
            let u = config.agent_utility(wage, h, e);
            if u > best_u + 1e-12 {
                best_u = u;
                best = (h, e);
            }
        }
    }
    best
}

/// Single-step profit of paying `wage` to an Agent of ability `nu` who best responds.
pub fn best_response_profit(config: &TeamConfig, nu: f64, wage: f64) -> f64 {
    let (h, e) = best_response(config, wage);
    h as f64 * (nu + e as f64) - wage * h as f64
}

/// Profit-maximizing wage per ability by exhaustive search over the wage
/// grid against the Agent's exact best response.
pub fn brute_force_wages(config: &TeamConfig) -> Vec<(f64, f64)> {
    config
        .abilities
        .iter()
        .map(|&nu| {
            let mut best = (0.0, f64::NEG_INFINITY);
            for w in config.wages() {
                let p = best_response_profit(config, nu, w);
                if p > best.1 + 1e-12 {
                    best = (w, p);
                }
            }
            (nu, best.0)
        })
        .collect()
}

/// Mean effort at the final timestep against earlier timesteps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffortCheck {
    pub final_mean: f64,
    /// `None` for single-step episodes.
    pub earlier_mean: Option<f64>,
}

impl EffortCheck {
    pub fn difference(&self) -> Option<f64> {
        self.earlier_mean.map(|e| self.final_mean - e)
    }
}

pub fn end_of_episode_effort_check(episodes: &[Episode]) -> EffortCheck {
    let (mut fin, mut nf, mut early, mut ne) = (0.0, 0usize, 0.0, 0usize);
    for ep in episodes {
        let last = ep.efforts.len().saturating_sub(1);
        for (t, es) in ep.efforts.iter().enumerate() {
            let s: f64 = es.iter().map(|&e| e as f64).sum();
            if t == last {
                fin += s;
                nf += es.len();
            } else {
                early += s;
                ne += es.len();
            }
        }
    }
    EffortCheck {
        final_mean: fin / nf.max(1) as f64,
        earlier_mean: (ne > 0).then(|| early / ne as f64),
    }
}
