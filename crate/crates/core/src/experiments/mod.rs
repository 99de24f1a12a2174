//! Sweep configuration, presets and the on-disk run layout.
//!
//! Each `(sweep point, seed)` gets its own directory:
//!
//! ```text
//! <output_dir>/<point>/config.json     snapshot of the resolved point config
//!                      metrics.csv     per-batch training log
//!                      results.csv     contract runs: one row per output level
//!                      episodes.csv    team runs: one row per Agent and step
//!                      *.ckpt / schedule.json
//!                      manifest.json   content hash, status, files
//! ```

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contract::{self, Beta, ContractConfig, Regularizer};
use crate::error::{Error, Result};
use crate::policy::save_checkpoint;
use crate::team::{self, TeamConfig, TeamRunConfig};
use crate::trainer::{write_metrics_csv, Baseline, TrainConfig};

/// Shifts every seed, for replication studies.
pub const SEED_OFFSET_VAR: &str = "RIRL_SEED_OFFSET";
pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_SNAPSHOT: &str = "config.json";
/// Bumped whenever a code change alters results, so manifests go stale.
pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"), "-r1");
pub const PRESETS: [&str; 6] = ["fig2", "fig3", "fig5", "fig6", "fig7", "fig8"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentId {
    #[default]
    Contract,
    Team,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Minutes-scale training for a single CPU core.
    Desk,
    /// The published training scale.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}` (desk or paper)"))),
        }
    }
}

/// Axes of a sweep; an empty axis keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sweep {
    pub lambda: Vec<f64>,
    pub beta: Vec<Beta>,
    pub regularizer: Vec<Regularizer>,
    pub lambda_z: Vec<f64>,
    pub lambda_e: Vec<f64>,
    pub horizon: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub environment: EnvironmentId,
    pub contract: ContractConfig,
    pub team: TeamRunConfig,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentId::Contract,
            contract: ContractConfig::default(),
            team: TeamRunConfig::default(),
            sweep: Sweep::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("runs"),
        }
    }
}

/// The resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "environment", rename_all = "lowercase")]
pub enum PointConfig {
    Contract(ContractConfig),
    Team(TeamRunConfig),
}

impl PointConfig {
    pub fn seed(&self) -> u64 {
        match self {
            PointConfig::Contract(c) => c.seed,
            PointConfig::Team(t) => t.train.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PointConfig::Contract(c) => c.validate(),
            PointConfig::Team(t) => {
                t.team.validate()?;
                t.train.validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    /// Directory name, e.g. `mi_lambda=1_beta=inf_seed=0`.
    pub name: String,
    pub config: PointConfig,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// `RIRL_SEED_OFFSET`, or 0 when unset.
pub fn seed_offset() -> Result<u64> {
    match std::env::var(SEED_OFFSET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{SEED_OFFSET_VAR}=`{v}` is not a nonnegative integer"))),
        Err(_) => Ok(0),
    }
}

fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        let s = &self.sweep;
        for v in s.lambda.iter().chain(&s.lambda_z).chain(&s.lambda_e) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidConfig(format!("sweep value {v} must be finite and >= 0")));
            }
        }
        // β = ∞ is the fully rational Agent.
        if s.beta.iter().any(|b| b.0.is_nan() || b.0 < 0.0) {
            return Err(Error::InvalidConfig("beta must be >= 0".into()));
        }
        if s.horizon.contains(&0) {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        for p in self.points_with_offset(0) {
            p.config.validate()?;
        }
        Ok(())
    }

    /// Overrides the training scale with one of the named profiles.
    pub fn apply_profile(&mut self, profile: Profile) {
        match self.environment {
            EnvironmentId::Contract => apply_contract_profile(&mut self.contract, profile),
            EnvironmentId::Team => apply_team_profile(&mut self.team, profile),
        }
    }

    /// Cartesian product of the sweep axes and seeds, with the seed offset from
    /// the environment.
    pub fn points(&self) -> Result<Vec<RunPoint>> {
        Ok(self.points_with_offset(seed_offset()?))
    }

    pub fn points_with_offset(&self, offset: u64) -> Vec<RunPoint> {
        let s = &self.sweep;
        let mut out = Vec::new();
        match self.environment {
            EnvironmentId::Contract => {
                let base = &self.contract;
                for &reg in &or_base(&s.regularizer, base.regularizer) {
                    for &beta in &or_base(&s.beta, base.agent.beta) {
                        for &lambda in &or_base(&s.lambda, base.lambda) {
                            for &seed in &self.seeds {
                                let mut c = base.clone();
                                c.regularizer = reg;
                                c.agent.beta = beta;
                                c.lambda = lambda;
                                c.seed = seed + offset;
                                out.push(RunPoint {
                                    name: format!("{}_lambda={}_beta={}_seed={}", reg.label(), fmt_num(lambda), beta.label(), c.seed),
                                    config: PointConfig::Contract(c),
                                });
                            }
                        }
                    }
                }
            }
            EnvironmentId::Team => {
                let base = &self.team;
                for &horizon in &or_base(&s.horizon, base.team.horizon) {
                    for &lz in &or_base(&s.lambda_z, base.team.lambda_z) {
                        for &le in &or_base(&s.lambda_e, base.team.lambda_e) {
                            for &seed in &self.seeds {
                                let mut c = base.clone();
                                c.team.horizon = horizon;
                                c.team.lambda_z = lz;
                                c.team.lambda_e = le;
                                c.train.seed = seed + offset;
                                out.push(RunPoint {
                                    name: format!("lz={}_le={}_T={}_seed={}", fmt_num(lz), fmt_num(le), horizon, c.train.seed),
                                    config: PointConfig::Team(c),
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn apply_contract_profile(c: &mut ContractConfig, profile: Profile) {
    match profile {
        Profile::Desk => {
            c.batch_size = 32;
            c.samples_per_schedule = 16;
            c.batches = 3000;
            c.policy_lr = 0.02;
            c.final_lr_fraction = 0.1;
            c.discriminator_hidden = vec![32, 32];
            c.discriminator_lr = 5e-3;
            c.anneal_rate = 2e-3;
        }
        Profile::Paper => {
            let d = ContractConfig::default();
            c.batch_size = d.batch_size;
            c.samples_per_schedule = d.samples_per_schedule;
            c.batches = d.batches;
            c.policy_lr = d.policy_lr;
            c.final_lr_fraction = d.final_lr_fraction;
            c.discriminator_hidden = d.discriminator_hidden;
            c.discriminator_lr = d.discriminator_lr;
            c.anneal_rate = d.anneal_rate;
        }
    }
}

/// Training options shared by both team profiles; `warmup` batches train the
/// Agents against a fixed Principal first.
fn team_train(batches: usize, warmup: usize, batch_size: usize, lr: f64, anneal_rate: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size,
        batches,
        policy_lr: lr,
        discriminator_lr: 1e-3,
        anneal_rate,
        gamma: 0.5,
        seed,
        entropy_coef: 0.3,
        baseline: Baseline::Linear,
        normalize_advantages: true,
        head_credit: true,
        discriminator_hidden: vec![32, 32],
        frozen: [("principal".to_string(), vec![(0, warmup)])].into_iter().collect(),
        actor_entropy: [("principal".to_string(), 0.3)].into_iter().collect(),
        ..TrainConfig::default()
    }
}

pub fn apply_team_profile(c: &mut TeamRunConfig, profile: Profile) {
    let seed = c.train.seed;
    c.train = match profile {
        Profile::Desk => team_train(2000, 500, 8, 1e-3, 2e-3, seed),
        Profile::Paper => team_train(60_000, 15_000, 512, 1e-4, 4e-4, seed),
    };
    c.encoder_hidden = 64;
    c.recurrent_hidden = 32;
    c.decoder_hidden = 64;
    c.eval_episodes = 200;
}

/// Single-Agent, single-step team game used as an oracle against exhaustive
/// search: Agents learn their best response first, then the Principal learns
/// wages against the frozen Agents.
pub fn brute_force_config(seed: u64) -> TeamRunConfig {
    let mut train = team_train(4000, 2000, 32, 1e-3, 2e-3, seed);
    train.gamma = 1.0;
    train.head_credit = false;
    train.entropy_coef = 0.1;
    train.frozen.insert("agent".into(), vec![(2000, 4000)]);
    TeamRunConfig {
        team: TeamConfig {
            n_agents: 1,
            horizon: 1,
            reveal_ability: true,
            ..TeamConfig::default()
        },
        train,
        encoder_hidden: 32,
        recurrent_hidden: 16,
        decoder_hidden: 32,
        eval_episodes: 500,
    }
}

/// The sweep behind one figure, at the given training scale.
pub fn preset(figure: &str, profile: Profile) -> Result<ExperimentConfig> {
    let contract = |lambdas: Vec<f64>, regs: Vec<Regularizer>| ExperimentConfig {
        environment: EnvironmentId::Contract,
        sweep: Sweep {
            lambda: lambdas,
            beta: vec![Beta(3.0), Beta(5.0), Beta::INFINITE],
            regularizer: regs,
            ..Sweep::default()
        },
        seeds: (0..5).collect(),
        output_dir: PathBuf::from("runs").join(figure),
        ..ExperimentConfig::default()
    };
    let team = |lz: Vec<f64>, le: Vec<f64>, horizons: Vec<usize>| ExperimentConfig {
        environment: EnvironmentId::Team,
        sweep: Sweep {
            lambda_z: lz,
            lambda_e: le,
            horizon: horizons,
            ..Sweep::default()
        },
        seeds: (0..20).collect(),
        output_dir: PathBuf::from("runs").join(figure),
        ..ExperimentConfig::default()
    };
    let lz: Vec<f64> = (0..=6).map(f64::from).collect();
    let le = vec![0.0, 0.5, 1.0, 2.0, 4.0, 6.0];
    let mut cfg = match figure {
        "fig2" => contract(vec![0.0, 1.0, 3.0], vec![Regularizer::Mi]),
        "fig3" => contract(vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0], vec![Regularizer::Mi, Regularizer::Entropy]),
        "fig5" => team(lz, le, vec![3, 5, 10]),
        "fig6" | "fig7" | "fig8" => team(lz, le, vec![5]),
        other => {
            return Err(Error::UnknownPreset {
                given: other.into(),
                known: PRESETS.join(", "),
            })
        }
    };
    cfg.apply_profile(profile);
    Ok(cfg)
}

/// Git-style blob hash of the point config and code version.
pub fn content_hash(config: &PointConfig) -> Result<String> {
    let body = serde_json::to_vec(&(CODE_VERSION, config))?;
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub hash: String,
    pub code_version: String,
    pub status: Status,
    pub error: Option<String>,
    pub files: Vec<String>,
}

pub fn read_manifest(dir: &Path) -> Option<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    serde_json::from_str(&text).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointStatus {
    /// A complete run with the same hash already existed.
    Skipped,
    Completed,
    Failed(String),
}

fn csv_file<F: FnOnce(fs::File) -> Result<()>>(dir: &Path, name: &str, files: &mut Vec<String>, f: F) -> Result<()> {
    f(fs::File::create(dir.join(name))?)?;
    files.push(name.into());
    Ok(())
}

fn execute(config: &PointConfig, dir: &Path) -> Result<Vec<String>> {
    let mut files = vec![CONFIG_SNAPSHOT.to_string()];
    match config {
        PointConfig::Contract(c) => {
            let out = contract::learn_schedule(c)?;
            csv_file(dir, "metrics.csv", &mut files, |f| contract::write_metrics_csv(&out.history, f))?;
            csv_file(dir, crate::metrics::CONTRACT_LOG, &mut files, |f| contract::write_results_csv(&out.rows(), f))?;
            let snapshot = serde_json::json!({ "format_version": 1, "schedule": out.schedule });
            fs::write(dir.join("schedule.json"), serde_json::to_vec_pretty(&snapshot)?)?;
            files.push("schedule.json".into());
        }
        PointConfig::Team(t) => {
            let out = team::learn_team(t)?;
            csv_file(dir, "metrics.csv", &mut files, |f| write_metrics_csv(&out.metrics, f))?;
            csv_file(dir, crate::metrics::EPISODE_LOG, &mut files, |f| team::write_episode_csv(&out.rows, f))?;
            for (name, actor) in ["principal", "agent"].iter().zip(&out.actors) {
                let file = format!("{name}.ckpt");
                save_checkpoint(actor, &dir.join(&file))?;
                files.push(file);
            }
        }
    }
    Ok(files)
}

/// Runs one point into `dir` unless an identical complete run is there.
/// Training errors are recorded in the manifest, not returned.
pub fn run_point(config: &PointConfig, dir: &Path, force: bool) -> Result<PointStatus> {
    let hash = content_hash(config)?;
    if !force {
        if let Some(m) = read_manifest(dir) {
            if m.hash == hash && m.status == Status::Complete {
                return Ok(PointStatus::Skipped);
            }
        }
    }
    fs::create_dir_all(dir)?;
    let _ = fs::remove_file(dir.join(MANIFEST));
    fs::write(dir.join(CONFIG_SNAPSHOT), serde_json::to_vec_pretty(config)?)?;
    let (status, error, files) = match execute(config, dir) {
        Ok(files) => (Status::Complete, None, files),
        Err(e) => (Status::Failed, Some(e.to_string()), vec![CONFIG_SNAPSHOT.to_string()]),
    };
    let manifest = Manifest {
        hash,
        code_version: CODE_VERSION.into(),
        status,
        error: error.clone(),
        files,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(match error {
        None => PointStatus::Completed,
        Some(e) => PointStatus::Failed(e),
    })
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    pub force: bool,
    /// Executable with a `run-point <config> <dir> [--force]` subcommand; when
    /// set and `jobs > 1`, points run as separate processes.
    pub worker: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            force: false,
            worker: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub points: Vec<(String, PointStatus)>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.points.iter().filter(|(_, s)| matches!(s, PointStatus::Failed(_))).count()
    }
}

fn spawn_worker(worker: &Path, point: &RunPoint, dir: &Path, force: bool) -> Result<Child> {
    fs::create_dir_all(dir)?;
    let pending = dir.join("pending.json");
    fs::write(&pending, serde_json::to_vec_pretty(&point.config)?)?;
    let mut cmd = Command::new(worker);
    cmd.arg("run-point").arg(&pending).arg(dir);
    if force {
        cmd.arg("--force");
    }
    Ok(cmd.spawn()?)
}

fn finish_worker(mut child: Child, dir: &Path) -> PointStatus {
    let exit = child.wait();
    let _ = fs::remove_file(dir.join("pending.json"));
    match read_manifest(dir) {
        Some(m) if m.status == Status::Complete => PointStatus::Completed,
        Some(m) => PointStatus::Failed(m.error.unwrap_or_default()),
        None => PointStatus::Failed(format!("worker exited without a manifest: {exit:?}")),
    }
}

/// Validates everything, then runs every point; one failing point does not
/// stop the others.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    let points = config.points()?;
    let root = &config.output_dir;
    fs::create_dir_all(root)?;
    fs::write(root.join("experiment.json"), serde_json::to_vec_pretty(config)?)?;
    let mut report = Vec::with_capacity(points.len());
    match (&options.worker, options.jobs) {
        (Some(worker), jobs) if jobs > 1 => {
            let mut running: VecDeque<(usize, Child)> = VecDeque::new();
            let mut statuses: Vec<Option<PointStatus>> = vec![None; points.len()];
            for (i, p) in points.iter().enumerate() {
                let dir = root.join(&p.name);
                if !options.force && read_manifest(&dir).is_some_and(|m| m.status == Status::Complete && Some(m.hash) == content_hash(&p.config).ok()) {
                    statuses[i] = Some(PointStatus::Skipped);
                    continue;
                }
                if running.len() >= jobs {
                    let (k, child) = running.pop_front().expect("non-empty");
                    statuses[k] = Some(finish_worker(child, &root.join(&points[k].name)));
                }
                match spawn_worker(worker, p, &dir, options.force) {
                    Ok(child) => running.push_back((i, child)),
                    Err(e) => statuses[i] = Some(PointStatus::Failed(e.to_string())),
                }
            }
            for (k, child) in running {
                statuses[k] = Some(finish_worker(child, &root.join(&points[k].name)));
            }
            for (p, s) in points.iter().zip(statuses) {
                report.push((p.name.clone(), s.expect("every point resolved")));
            }
        }
        _ => {
            for p in &points {
                log::info!("running {}", p.name);
                let status = run_point(&p.config, &root.join(&p.name), options.force)?;
                report.push((p.name.clone(), status));
            }
        }
    }
    Ok(RunReport { points: report })
}
