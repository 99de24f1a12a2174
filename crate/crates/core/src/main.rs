use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rirl::experiments::{self, ExperimentConfig, PointConfig, PointStatus, Profile, RunOptions};

#[derive(Parser)]
#[command(name = "rirl", version, about = "Rationally inattentive principal-agent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Desk => Profile::Desk,
            ProfileArg::Paper => Profile::Paper,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every sweep point of an experiment config.
    Run {
        config: PathBuf,
        /// Worker processes to run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the training scale.
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
        /// Rerun points that already completed.
        #[arg(long)]
        force: bool,
    },
    /// Print the experiment config behind a figure.
    Preset {
        figure: String,
        #[arg(long, value_enum, default_value = "desk")]
        profile: ProfileArg,
    },
    /// Summarize run logs under a directory into figure CSVs.
    Summarize { dir: PathBuf },
    #[command(hide = true)]
    RunPoint {
        config: PathBuf,
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> rirl::Result<ExitCode> {
    match cmd {
        Cmd::Run { config, jobs, profile, force } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = profile {
                cfg.apply_profile(p.into());
            }
            let options = RunOptions {
                jobs: jobs.max(1),
                force,
                worker: std::env::current_exe().ok(),
            };
            let report = experiments::run(&cfg, &options)?;
            for (name, status) in &report.points {
                match status {
                    PointStatus::Failed(e) => println!("{name}: failed: {e}"),
                    s => println!("{name}: {}", if *s == PointStatus::Skipped { "skipped" } else { "completed" }),
                }
            }
            Ok(if report.failed() > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Cmd::Preset { figure, profile } => {
            let cfg = experiments::preset(&figure, profile.into())?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Summarize { dir } => {
            let summary = rirl::metrics::summarize(&dir)?;
            println!(
                "{} team runs, {} contract rows; wrote {}",
                summary.team.len(),
                summary.contract.len(),
                summary.figures.join(", ")
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::RunPoint { config, dir, force } => {
            let point: PointConfig = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
            Ok(match experiments::run_point(&point, &dir, force)? {
                PointStatus::Failed(_) => ExitCode::FAILURE,
                _ => ExitCode::SUCCESS,
            })
        }
    }
}
