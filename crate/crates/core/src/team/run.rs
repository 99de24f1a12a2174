//! Training and evaluation runs of the team game.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{play_episode, Episode, TeamConfig, TeamEnv, EFFORT, OUTPUT};
use crate::error::Result;
use crate::policy::{ActorDiscriminators, RirlActor};
use crate::rng::{self, streams};
use crate::trainer::{train, MetricRow, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeamRunConfig {
    pub team: TeamConfig,
    pub train: TrainConfig,
    pub encoder_hidden: usize,
    pub recurrent_hidden: usize,
    pub decoder_hidden: usize,
    /// Episodes played with the trained actors for the episode log.
    pub eval_episodes: usize,
}

impl Default for TeamRunConfig {
    fn default() -> Self {
        Self {
            team: TeamConfig::default(),
            train: TrainConfig::default(),
            encoder_hidden: 64,
            recurrent_hidden: 32,
            decoder_hidden: 64,
            eval_episodes: 200,
        }
    }
}

/// One row of the episode log: one Agent at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    pub lambda_z: f64,
    pub lambda_e: f64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub t: usize,
    pub agent_id: usize,
    #[serde(rename = "nu")]
    pub ability: f64,
    #[serde(rename = "w")]
    pub wage: f64,
    #[serde(rename = "h")]
    pub hours: usize,
    #[serde(rename = "e")]
    pub effort: usize,
    #[serde(rename = "z")]
    pub output: f64,
    pub u_a: f64,
    pub u_p: f64,
    /// Principal's attention to this timestep's individual outputs, measured
    /// when it sets the next wages. Blank at the final timestep.
    pub mi_z: Option<f64>,
    pub mi_e: Option<f64>,
}

pub struct TeamOutcome {
    pub config: TeamRunConfig,
    pub actors: Vec<RirlActor>,
    pub discriminators: Vec<ActorDiscriminators>,
    pub metrics: Vec<MetricRow>,
    pub episodes: Vec<Episode>,
    pub rows: Vec<EpisodeRow>,
}

/// Trains both actors, then plays `eval_episodes` evaluation episodes.
pub fn learn_team(config: &TeamRunConfig) -> Result<TeamOutcome> {
    let mut env = TeamEnv::new(config.team.clone())?;
    let sizes = (config.encoder_hidden, config.recurrent_hidden, config.decoder_hidden);
    let actors = env.actors(sizes, config.train.seed)?;
    let trained = train(&config.train, &mut env, actors)?;
    let mut eval_rng = rng::stream(config.train.seed, streams::EVAL);
    let mut episodes = Vec::with_capacity(config.eval_episodes);
    let mut rows = Vec::new();
    for k in 0..config.eval_episodes {
        let ep = play_episode(&config.team, &trained.actors[0], &trained.actors[1], &mut eval_rng)?;
        rows.extend(episode_rows(config, &trained.discriminators[0], &ep, k));
        episodes.push(ep);
    }
    Ok(TeamOutcome {
        config: config.clone(),
        actors: trained.actors,
        discriminators: trained.discriminators,
        metrics: trained.metrics,
        episodes,
        rows,
    })
}

fn episode_rows(config: &TeamRunConfig, discs: &ActorDiscriminators, ep: &Episode, k: usize) -> Vec<EpisodeRow> {
    let team = &config.team;
    let penalties: Vec<_> = ep.principal_steps.iter().map(|s| discs.attention_penalties(s)).collect();
    let mut rows = Vec::with_capacity(ep.horizon() * team.n_agents);
    for t in 0..ep.horizon() {
        // Outcomes of step t are first seen by the decision at t + 1.
        let seen = penalties.get(t + 1);
        let mi_z = seen.and_then(|p| p.channels[OUTPUT]);
        let mi_e = seen.and_then(|p| p.channels[EFFORT]);
        for i in 0..team.n_agents {
            rows.push(EpisodeRow {
                seed: config.train.seed,
                episode: k,
                lambda_z: team.lambda_z,
                lambda_e: team.lambda_e,
                horizon: team.horizon,
                t,
                agent_id: i,
                ability: ep.abilities[i],
                wage: ep.wages[t][i],
                hours: ep.hours[t][i],
                effort: ep.efforts[t][i],
                output: ep.outputs[t][i],
                u_a: ep.agent_utility[i][t],
                u_p: ep.principal_utility[t],
                mi_z,
                mi_e,
            });
        }
    }
    rows
}

pub fn write_episode_csv<W: Write>(rows: &[EpisodeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episode_csv<R: std::io::Read>(input: R) -> Result<Vec<EpisodeRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
