//! Welfare and attention analytics over run logs, and the figure CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::contract::ContractRow;
use crate::error::{Error, Result};
use crate::rng;
use crate::team::{read_episode_csv, EpisodeRow};

/// Added to utilities shifted by their minimum so the poorest is not exactly zero.
pub const GINI_SHIFT_EPS: f64 = 1e-3;
pub const BOOTSTRAP_RESAMPLES: usize = 2000;
const BOOTSTRAP_STREAM: u64 = 6;

/// `Σ_{i,j}|x_i − x_j| / (2 n² x̄)`; zero when every income is zero.
pub fn gini(incomes: &[f64]) -> Result<f64> {
    if incomes.is_empty() {
        return Err(Error::InvalidConfig("gini of an empty income vector".into()));
    }
    if incomes.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidConfig("gini needs finite nonnegative incomes".into()));
    }
    let n = incomes.len() as f64;
    let total: f64 = incomes.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut sorted = incomes.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Σ_{i,j}|x_i − x_j| = 2 Σ_i (2i − n + 1) x_(i) over sorted values.
    let diff: f64 = sorted.iter().enumerate().map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x).sum::<f64>() * 2.0;
    Ok(diff / (2.0 * n * total))
}

/// `1 − n/(n−1)·gini`.
pub fn equality(gini: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConfig("equality needs at least two incomes".into()));
    }
    Ok(1.0 - n as f64 / (n as f64 - 1.0) * gini)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedGini {
    pub gini: f64,
    /// Amount added to every income; zero when none was negative.
    pub shift: f64,
}

/// Gini of possibly negative values, shifted by `−min + GINI_SHIFT_EPS` when
/// any value is negative.
pub fn shifted_gini(values: &[f64]) -> Result<ShiftedGini> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min + GINI_SHIFT_EPS } else { 0.0 };
    let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
    Ok(ShiftedGini {
        gini: gini(&shifted)?,
        shift,
    })
}

/// Mean with a percentile-bootstrap confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

fn bootstrap_means<R: Rng + ?Sized>(values: &[f64], resamples: usize, rng: &mut R) -> Data<Vec<f64>> {
    let n = values.len();
    let means = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    Data::new(means)
}

/// Two-sided percentile bootstrap band at `level` (e.g. 0.95).
pub fn bootstrap_band(values: &[f64], level: f64) -> Band {
    let m = mean(values);
    if values.len() < 2 {
        return Band { mean: m, lo: m, hi: m, n: values.len() };
    }
    let mut rng = rng::stream(0, BOOTSTRAP_STREAM);
    let mut d = bootstrap_means(values, BOOTSTRAP_RESAMPLES, &mut rng);
    let tail = (1.0 - level) / 2.0;
    Band {
        mean: m,
        lo: d.quantile(tail),
        hi: d.quantile(1.0 - tail),
        n: values.len(),
    }
}

/// One-sided lower bootstrap bound on the mean: the `1 − level` quantile of
/// resampled means. A positive bound rejects "mean ≤ 0" at `level`.
pub fn bootstrap_lower_bound(values: &[f64], level: f64) -> f64 {
    if values.len() < 2 {
        return mean(values);
    }
    let mut rng = rng::stream(0, BOOTSTRAP_STREAM);
    bootstrap_means(values, BOOTSTRAP_RESAMPLES, &mut rng).quantile(1.0 - level)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `NaN` if either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Per-ability means over an evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityStats {
    pub nu: f64,
    pub wage: f64,
    pub effort: f64,
    pub hours: f64,
    pub output: f64,
    /// Mean episode utility of an Agent of this ability.
    pub utility: f64,
}

/// Welfare summary of one team run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareSummary {
    pub seed: u64,
    pub lambda_z: f64,
    pub lambda_e: f64,
    pub horizon: usize,
    pub episodes: usize,
    /// Mean episode Principal utility.
    pub mean_u_p: f64,
    /// Mean episode utility of one Agent.
    pub mean_u_a: f64,
    pub mean_wage: f64,
    pub mean_effort: f64,
    pub by_ability: Vec<AbilityStats>,
    /// Mean within-episode Gini of Agent utilities.
    pub gini: f64,
    pub equality: f64,
    /// Largest shift applied to make utilities nonnegative.
    pub gini_shift: f64,
    /// Mean within-episode equality of wage income.
    pub wage_equality: f64,
    /// Mean `Ĩ^z` and `Ĩ^e` per timestep; `None` where unmeasured.
    pub mi_z: Vec<Option<f64>>,
    pub mi_e: Vec<Option<f64>>,
}

impl WelfareSummary {
    /// Ability wage spread: mean wage of the highest minus the lowest ability.
    pub fn wage_spread(&self) -> f64 {
        match (self.by_ability.first(), self.by_ability.last()) {
            (Some(lo), Some(hi)) => hi.wage - lo.wage,
            _ => 0.0,
        }
    }
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Summarizes the episode log of a single run.
pub fn summarize_team_run(rows: &[EpisodeRow]) -> Result<WelfareSummary> {
    let first = rows.first().ok_or_else(|| Error::EmptyWindow(PathBuf::from("<episode rows>")))?;
    if rows.iter().any(|r| r.seed != first.seed || r.lambda_z != first.lambda_z || r.lambda_e != first.lambda_e || r.horizon != first.horizon) {
        return Err(Error::InvalidConfig("episode rows span more than one run".into()));
    }
    // (episode, agent) -> (ability, utility sum, wage sum)
    let mut per_agent: BTreeMap<(usize, usize), (f64, f64, f64)> = BTreeMap::new();
    let mut principal: BTreeMap<usize, f64> = BTreeMap::new();
    for r in rows {
        let e = per_agent.entry((r.episode, r.agent_id)).or_insert((r.ability, 0.0, 0.0));
        e.1 += r.u_a;
        e.2 += r.wage * r.hours as f64;
        if r.agent_id == 0 {
            *principal.entry(r.episode).or_insert(0.0) += r.u_p;
        }
    }
    let mut abilities: Vec<f64> = rows.iter().map(|r| r.ability).collect();
    abilities.sort_by(f64::total_cmp);
    abilities.dedup();
    let by_ability = abilities
        .iter()
        .map(|&nu| {
            let s: Vec<&EpisodeRow> = rows.iter().filter(|r| r.ability == nu).collect();
            let m = |f: &dyn Fn(&EpisodeRow) -> f64| s.iter().map(|r| f(r)).sum::<f64>() / s.len() as f64;
            let utils: Vec<f64> = per_agent.values().filter(|a| a.0 == nu).map(|a| a.1).collect();
            AbilityStats {
                nu,
                wage: m(&|r| r.wage),
                effort: m(&|r| r.effort as f64),
                hours: m(&|r| r.hours as f64),
                output: m(&|r| r.output),
                utility: mean(&utils),
            }
        })
        .collect();

    let mut ginis = Vec::new();
    let mut wage_eq = Vec::new();
    let mut shift: f64 = 0.0;
    let mut n_agents = 0;
    let episodes: Vec<usize> = principal.keys().copied().collect();
    for &ep in &episodes {
        let agents: Vec<&(f64, f64, f64)> = per_agent.range((ep, 0)..(ep + 1, 0)).map(|(_, v)| v).collect();
        n_agents = agents.len();
        if n_agents < 2 {
            continue;
        }
        let g = shifted_gini(&agents.iter().map(|a| a.1).collect::<Vec<_>>())?;
        shift = shift.max(g.shift);
        ginis.push(g.gini);
        wage_eq.push(equality(gini(&agents.iter().map(|a| a.2).collect::<Vec<_>>())?, n_agents)?);
    }
    let g = mean(&ginis);
    let eq = if n_agents >= 2 { equality(g, n_agents)? } else { 1.0 };
    let horizon = first.horizon;
    let mi = |f: &dyn Fn(&EpisodeRow) -> Option<f64>| -> Vec<Option<f64>> {
        (0..horizon).map(|t| mean_opt(rows.iter().filter(|r| r.t == t && r.agent_id == 0).map(f))).collect()
    };
    Ok(WelfareSummary {
        seed: first.seed,
        lambda_z: first.lambda_z,
        lambda_e: first.lambda_e,
        horizon,
        episodes: episodes.len(),
        mean_u_p: mean(&principal.values().copied().collect::<Vec<_>>()),
        mean_u_a: mean(&per_agent.values().map(|a| a.1).collect::<Vec<_>>()),
        mean_wage: mean(&rows.iter().map(|r| r.wage).collect::<Vec<_>>()),
        mean_effort: mean(&rows.iter().map(|r| r.effort as f64).collect::<Vec<_>>()),
        by_ability,
        gini: g,
        equality: eq,
        gini_shift: shift,
        wage_equality: if wage_eq.is_empty() { 1.0 } else { mean(&wage_eq) },
        mi_z: mi(&|r| r.mi_z),
        mi_e: mi(&|r| r.mi_e),
    })
}

/// Per-timestep attention across runs of one `(λ^z, λ^e, T)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimecoursePoint {
    pub t: usize,
    pub mi_z: Option<Band>,
    pub mi_e: Option<Band>,
}

pub fn attention_timecourse(runs: &[&WelfareSummary]) -> Vec<TimecoursePoint> {
    let horizon = runs.iter().map(|r| r.horizon).max().unwrap_or(0);
    let band = |v: Vec<f64>| (!v.is_empty()).then(|| bootstrap_band(&v, 0.95));
    (0..horizon)
        .map(|t| TimecoursePoint {
            t,
            mi_z: band(runs.iter().filter_map(|r| r.mi_z.get(t).copied().flatten()).collect()),
            mi_e: band(runs.iter().filter_map(|r| r.mi_e.get(t).copied().flatten()).collect()),
        })
        .collect()
}

/// `Ĩ^z` at `t = 0` minus its mean over `t ≥ T/2`, per run. Runs without
/// a measurement at either end are skipped.
pub fn early_attention_excess(runs: &[&WelfareSummary]) -> Vec<f64> {
    runs.iter()
        .filter_map(|r| {
            let first = r.mi_z.first().copied().flatten()?;
            let late: Vec<f64> = r.mi_z.iter().skip(r.horizon / 2).flatten().copied().collect();
            (!late.is_empty()).then(|| first - mean(&late))
        })
        .collect()
}

/// Columns that must be present in each log kind.
pub const EPISODE_COLUMNS: [&str; 16] = [
    "seed", "episode", "lambda_z", "lambda_e", "T", "t", "agent_id", "nu", "w", "h", "e", "z", "u_a", "u_p", "mi_z", "mi_e",
];
pub const CONTRACT_COLUMNS: [&str; 17] = [
    "condition", "lambda", "beta", "seed", "z", "mu_z", "sigma_z", "u_p", "u_a", "mi_wz", "mi_exact", "u_p_zero_pay", "fit_a",
    "fit_b", "fit_c", "fit_rho", "fit_r2",
];

fn check_columns(path: &Path, required: &[&str]) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?;
    for col in required {
        if !header.iter().any(|h| h == *col) {
            return Err(Error::MissingColumn {
                column: (*col).into(),
                path: path.to_path_buf(),
            });
        }
    }
    Ok(())
}

pub fn read_team_log(path: &Path) -> Result<Vec<EpisodeRow>> {
    check_columns(path, &EPISODE_COLUMNS)?;
    read_episode_csv(fs::File::open(path)?)
}

pub fn read_contract_log(path: &Path) -> Result<Vec<ContractRow>> {
    check_columns(path, &CONTRACT_COLUMNS)?;
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn find_files(dir: &Path, name: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::result::Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_files(&p, name, out)?;
        } else if p.file_name().is_some_and(|f| f == name) {
            out.push(p);
        }
    }
    Ok(())
}

pub const EPISODE_LOG: &str = "episodes.csv";
pub const CONTRACT_LOG: &str = "results.csv";

/// Everything `summarize` found under a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectorySummary {
    pub team: Vec<WelfareSummary>,
    pub contract: Vec<ContractRow>,
    /// Figure CSVs written, relative to the summarized directory.
    pub figures: Vec<String>,
}

/// Reads every run log under `dir`, writes `summary.json` and the figure
/// CSVs that the logs support.
pub fn summarize(dir: &Path) -> Result<DirectorySummary> {
    let mut team_logs = Vec::new();
    let mut contract_logs = Vec::new();
    find_files(dir, EPISODE_LOG, &mut team_logs)?;
    find_files(dir, CONTRACT_LOG, &mut contract_logs)?;
    let mut team = Vec::new();
    for p in &team_logs {
        let rows = read_team_log(p)?;
        if rows.is_empty() {
            return Err(Error::EmptyWindow(p.clone()));
        }
        team.push(summarize_team_run(&rows)?);
    }
    let mut contract = Vec::new();
    for p in &contract_logs {
        let rows = read_contract_log(p)?;
        if rows.is_empty() {
            return Err(Error::EmptyWindow(p.clone()));
        }
        contract.extend(rows);
    }
    if team.is_empty() && contract.is_empty() {
        return Err(Error::EmptyWindow(dir.to_path_buf()));
    }
    let mut figures = Vec::new();
    let mut emit = |name: &str, body: Vec<u8>| -> Result<()> {
        fs::write(dir.join(name), body)?;
        figures.push(name.to_string());
        Ok(())
    };
    if !contract.is_empty() {
        emit("fig2.csv", fig2_csv(&contract)?)?;
        emit("fig3.csv", fig3_csv(&contract)?)?;
        emit("fig4.csv", fig4_csv(&contract)?)?;
    }
    if !team.is_empty() {
        emit("fig5.csv", fig5_csv(&team)?)?;
        emit("fig6.csv", fig6_csv(&team)?)?;
        emit("fig7.csv", fig7_csv(&team)?)?;
        emit("fig8.csv", fig8_csv(&team)?)?;
    }
    let summary = DirectorySummary { team, contract, figures };
    fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

fn key(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

fn csv_bytes<S: Serialize>(rows: &[S]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn beta_order(label: &str) -> f64 {
    label.parse().unwrap_or(f64::INFINITY)
}

/// Groups contract rows by `(condition, λ, β)`, sorted.
fn contract_groups(rows: &[ContractRow]) -> Vec<((String, f64, String), Vec<&ContractRow>)> {
    let mut g: BTreeMap<(String, i64, i64, String), Vec<&ContractRow>> = BTreeMap::new();
    for r in rows {
        g.entry((r.condition.clone(), key(r.lambda), key(beta_order(&r.beta).min(1e12)), r.beta.clone()))
            .or_default()
            .push(r);
    }
    g.into_iter().map(|((c, _, _, b), v)| ((c, v[0].lambda, b), v)).collect()
}

/// Rows for a per-run quantity (one value per seed).
fn per_run<'a>(rows: &[&'a ContractRow]) -> Vec<&'a ContractRow> {
    let mut seen = BTreeMap::new();
    for r in rows {
        seen.entry(r.seed).or_insert(*r);
    }
    seen.into_values().collect()
}

/// `fig2.csv`: mean pay schedule per output level.
///
/// Columns: `condition,lambda,beta,z,mu_mean,mu_lo,mu_hi,n_seeds`.
pub fn fig2_csv(rows: &[ContractRow]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row<'a> {
        condition: &'a str,
        lambda: f64,
        beta: &'a str,
        z: usize,
        mu_mean: f64,
        mu_lo: f64,
        mu_hi: f64,
        n_seeds: usize,
    }
    let groups = contract_groups(rows);
    let mut out = Vec::new();
    for ((c, lambda, beta), g) in &groups {
        let zmax = g.iter().map(|r| r.z).max().unwrap_or(0);
        for z in 0..=zmax {
            let v: Vec<f64> = g.iter().filter(|r| r.z == z).map(|r| r.mu_z).collect();
            let b = bootstrap_band(&v, 0.95);
            out.push(Row { condition: c, lambda: *lambda, beta, z, mu_mean: b.mean, mu_lo: b.lo, mu_hi: b.hi, n_seeds: b.n });
        }
    }
    csv_bytes(&out)
}

#[derive(Serialize)]
struct UtilityRow<'a> {
    condition: &'a str,
    lambda: f64,
    beta: &'a str,
    u_a_mean: f64,
    u_a_lo: f64,
    u_a_hi: f64,
    u_p_mean: f64,
    u_p_lo: f64,
    u_p_hi: f64,
    mi_mean: f64,
    mi_lo: f64,
    mi_hi: f64,
    range_mean: f64,
    u_p_zero_pay: f64,
    n_seeds: usize,
}

fn utility_rows(rows: &[ContractRow], filter: impl Fn(&str) -> bool) -> Result<Vec<u8>> {
    let groups = contract_groups(rows);
    let mut out = Vec::new();
    for ((c, lambda, beta), g) in &groups {
        if !filter(c) {
            continue;
        }
        let runs = per_run(g);
        let col = |f: &dyn Fn(&ContractRow) -> f64| bootstrap_band(&runs.iter().map(|r| f(r)).collect::<Vec<_>>(), 0.95);
        let (ua, up, mi) = (col(&|r| r.u_a), col(&|r| r.u_p), col(&|r| r.mi_wz));
        let ranges: Vec<f64> = runs
            .iter()
            .map(|run| {
                let mu: Vec<f64> = g.iter().filter(|r| r.seed == run.seed).map(|r| r.mu_z).collect();
                mu.iter().copied().fold(f64::MIN, f64::max) - mu.iter().copied().fold(f64::MAX, f64::min)
            })
            .collect();
        out.push(UtilityRow {
            condition: c,
            lambda: *lambda,
            beta,
            u_a_mean: ua.mean,
            u_a_lo: ua.lo,
            u_a_hi: ua.hi,
            u_p_mean: up.mean,
            u_p_lo: up.lo,
            u_p_hi: up.hi,
            mi_mean: mi.mean,
            mi_lo: mi.lo,
            mi_hi: mi.hi,
            range_mean: mean(&ranges),
            u_p_zero_pay: runs[0].u_p_zero_pay,
            n_seeds: runs.len(),
        });
    }
    csv_bytes(&out)
}

/// `fig3.csv`: utilities, `Ĩ(w; z)` and schedule range against λ for the
/// MI-regularized runs.
///
/// Columns: `condition,lambda,beta,u_a_mean,u_a_lo,u_a_hi,u_p_mean,u_p_lo,u_p_hi,mi_mean,mi_lo,mi_hi,range_mean,u_p_zero_pay,n_seeds`.
pub fn fig3_csv(rows: &[ContractRow]) -> Result<Vec<u8>> {
    utility_rows(rows, |c| c == "mi")
}

/// `fig4.csv`: the same columns as `fig3.csv` for every regularizer, for
/// comparing MI against entropy costs and the zero-pay bound. Schedules
/// for both are in `fig2.csv`.
pub fn fig4_csv(rows: &[ContractRow]) -> Result<Vec<u8>> {
    utility_rows(rows, |_| true)
}

type PointKey = (i64, i64, usize);

fn team_groups(runs: &[WelfareSummary]) -> BTreeMap<PointKey, Vec<&WelfareSummary>> {
    let mut g: BTreeMap<PointKey, Vec<&WelfareSummary>> = BTreeMap::new();
    for r in runs {
        g.entry((key(r.lambda_z), key(r.lambda_e), r.horizon)).or_default().push(r);
    }
    g
}

#[derive(Serialize)]
struct BandRow {
    panel: &'static str,
    lambda_z: f64,
    lambda_e: f64,
    #[serde(rename = "T")]
    horizon: usize,
    t: Option<usize>,
    channel: &'static str,
    mean: f64,
    lo: f64,
    hi: f64,
    n_seeds: usize,
}

/// `fig5.csv`: attention heatmap cells (`panel = heatmap`, mean over
/// measured timesteps) and time-courses (`panel = timecourse`).
///
/// Columns: `panel,lambda_z,lambda_e,T,t,channel,mean,lo,hi,n_seeds`.
pub fn fig5_csv(runs: &[WelfareSummary]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (_, g) in team_groups(runs) {
        let (lz, le, horizon) = (g[0].lambda_z, g[0].lambda_e, g[0].horizon);
        for (channel, get) in [("z", (|r: &WelfareSummary| r.mi_z.clone()) as fn(&WelfareSummary) -> Vec<Option<f64>>), ("e", |r| r.mi_e.clone())] {
            let per_run: Vec<f64> = g.iter().filter_map(|r| mean_opt(get(r).into_iter())).collect();
            if !per_run.is_empty() {
                let b = bootstrap_band(&per_run, 0.95);
                out.push(BandRow { panel: "heatmap", lambda_z: lz, lambda_e: le, horizon, t: None, channel, mean: b.mean, lo: b.lo, hi: b.hi, n_seeds: b.n });
            }
        }
        for p in attention_timecourse(&g) {
            for (channel, band) in [("z", p.mi_z), ("e", p.mi_e)] {
                if let Some(b) = band {
                    out.push(BandRow { panel: "timecourse", lambda_z: lz, lambda_e: le, horizon, t: Some(p.t), channel, mean: b.mean, lo: b.lo, hi: b.hi, n_seeds: b.n });
                }
            }
        }
    }
    csv_bytes(&out)
}

/// `fig6.csv`: mean Principal and Agent utility per `(λ^z, λ^e, T)`.
///
/// Columns: `lambda_z,lambda_e,T,u_p_mean,u_p_lo,u_p_hi,u_a_mean,u_a_lo,u_a_hi,n_seeds`.
pub fn fig6_csv(runs: &[WelfareSummary]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row {
        lambda_z: f64,
        lambda_e: f64,
        #[serde(rename = "T")]
        horizon: usize,
        u_p_mean: f64,
        u_p_lo: f64,
        u_p_hi: f64,
        u_a_mean: f64,
        u_a_lo: f64,
        u_a_hi: f64,
        n_seeds: usize,
    }
    let mut out = Vec::new();
    for (_, g) in team_groups(runs) {
        let up = bootstrap_band(&g.iter().map(|r| r.mean_u_p).collect::<Vec<_>>(), 0.95);
        let ua = bootstrap_band(&g.iter().map(|r| r.mean_u_a).collect::<Vec<_>>(), 0.95);
        out.push(Row {
            lambda_z: g[0].lambda_z,
            lambda_e: g[0].lambda_e,
            horizon: g[0].horizon,
            u_p_mean: up.mean,
            u_p_lo: up.lo,
            u_p_hi: up.hi,
            u_a_mean: ua.mean,
            u_a_lo: ua.lo,
            u_a_hi: ua.hi,
            n_seeds: g.len(),
        });
    }
    csv_bytes(&out)
}

/// `fig7.csv`: mean wage per ability (`panel = wage`, `nu` set) and utility
/// equality against mean Agent utility (`panel = equality`, `nu` blank).
///
/// Columns: `panel,lambda_z,lambda_e,T,nu,mean,lo,hi,u_a_mean,n_seeds`.
pub fn fig7_csv(runs: &[WelfareSummary]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row {
        panel: &'static str,
        lambda_z: f64,
        lambda_e: f64,
        #[serde(rename = "T")]
        horizon: usize,
        nu: Option<f64>,
        mean: f64,
        lo: f64,
        hi: f64,
        u_a_mean: f64,
        n_seeds: usize,
    }
    let mut out = Vec::new();
    for (_, g) in team_groups(runs) {
        let (lz, le, horizon) = (g[0].lambda_z, g[0].lambda_e, g[0].horizon);
        let u_a_mean = mean(&g.iter().map(|r| r.mean_u_a).collect::<Vec<_>>());
        for (k, a) in g[0].by_ability.iter().enumerate() {
            let v: Vec<f64> = g.iter().filter_map(|r| r.by_ability.get(k)).map(|s| s.wage).collect();
            let b = bootstrap_band(&v, 0.95);
            out.push(Row { panel: "wage", lambda_z: lz, lambda_e: le, horizon, nu: Some(a.nu), mean: b.mean, lo: b.lo, hi: b.hi, u_a_mean, n_seeds: b.n });
        }
        let b = bootstrap_band(&g.iter().map(|r| r.equality).collect::<Vec<_>>(), 0.95);
        out.push(Row { panel: "equality", lambda_z: lz, lambda_e: le, horizon, nu: None, mean: b.mean, lo: b.lo, hi: b.hi, u_a_mean, n_seeds: b.n });
    }
    csv_bytes(&out)
}

/// `fig8.csv`: change of each per-ability quantity relative to the `λ = 0`
/// run with the same seed, along the output axis (`λ^e = 0`) and the effort
/// axis (`λ^z = 0`).
///
/// Columns: `axis,lambda,T,nu,quantity,delta_mean,delta_lo,delta_hi,n_seeds`.
pub fn fig8_csv(runs: &[WelfareSummary]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row {
        axis: &'static str,
        lambda: f64,
        #[serde(rename = "T")]
        horizon: usize,
        nu: f64,
        quantity: &'static str,
        delta_mean: f64,
        delta_lo: f64,
        delta_hi: f64,
        n_seeds: usize,
    }
    type Getter = fn(&AbilityStats) -> f64;
    let quantities: [(&str, Getter); 5] = [
        ("wage", |a| a.wage),
        ("effort", |a| a.effort),
        ("hours", |a| a.hours),
        ("output", |a| a.output),
        ("utility", |a| a.utility),
    ];
    let groups = team_groups(runs);
    let mut out = Vec::new();
    for ((lz, le, horizon), g) in &groups {
        let axis = match (*lz == 0, *le == 0) {
            (true, true) => continue,
            (false, true) => "output",
            (true, false) => "effort",
            (false, false) => continue,
        };
        let Some(base) = groups.get(&(0, 0, *horizon)) else { continue };
        let lambda = if axis == "output" { g[0].lambda_z } else { g[0].lambda_e };
        for (k, a) in g[0].by_ability.iter().enumerate() {
            for (name, f) in quantities {
                let deltas: Vec<f64> = g
                    .iter()
                    .filter_map(|r| {
                        let b = base.iter().find(|b| b.seed == r.seed)?;
                        Some(f(r.by_ability.get(k)?) - f(b.by_ability.get(k)?))
                    })
                    .collect();
                if deltas.is_empty() {
                    continue;
                }
                let b = bootstrap_band(&deltas, 0.95);
                out.push(Row { axis, lambda, horizon: *horizon, nu: a.nu, quantity: name, delta_mean: b.mean, delta_lo: b.lo, delta_hi: b.hi, n_seeds: b.n });
            }
        }
    }
    csv_bytes(&out)
}

/// Writes a [`WelfareSummary`] list as JSON lines.
pub fn write_summaries<W: Write>(runs: &[WelfareSummary], mut out: W) -> Result<()> {
    for r in runs {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
