//! Configuration-driven experiment harness for ergodic information
//! gathering. Each subcommand writes deterministic CSV and grid files.

pub mod commands;
pub mod config;
pub mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ergodic_core::io;
use ergodic_core::spectral::DensityField;
use ergodic_core::trajectory::Trajectory;
use thiserror::Error;

use crate::commands::*;
use crate::config::ExperimentConfig;
use crate::output::OutputDir;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ergodic_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(ergodic_core::Error::NonFinite { .. })
            | CliError::Core(ergodic_core::Error::DomainViolation { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ergodic", version, about = "Ergodic trajectory and information-gathering experiments")]
pub struct Cli {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Optimizer seed (overrides `optimizer.seed`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Coefficient order per axis.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Trajectory steps.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Information collected against ergodic score, plus greedy and reference rows.
    ScoreSweep,
    /// Single trajectory against two half-horizon trajectories.
    Horizon,
    /// Reconstruct a trajectory's spatial distribution at several orders.
    Reconstruct {
        /// Grid file for the source density; the config EID when omitted
        #[arg(long)]
        field: Option<PathBuf>,
        /// Trajectory CSV; optimized on the config EID when omitted
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Comma-separated orders (overrides `reconstruct_orders`).
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<usize>>,
    },
    /// Residual density after executing part of a trajectory.
    Residual {
        /// Grid file for the target density; `residual_eid` when omitted
        #[arg(long)]
        field: Option<PathBuf>,
        /// Trajectory CSV; a demo trajectory when omitted
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Executed fraction (overrides `residual_split`).
        #[arg(long)]
        split: Option<f64>,
    },
    /// Two-state and two-post closed-form scenarios.
    Scenarios,
    /// Optimize one trajectory and write it with its iteration log.
    Optimize,
    /// Run the collection model along a trajectory (optimized if none given).
    Simulate {
        /// Trajectory CSV to simulate
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

impl Cli {
    /// Loads the config and applies command-line overrides.
    pub fn resolve_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.optimizer.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
            if matches!(self.command, Command::Residual { .. }) {
                cfg.residual_k = k;
            }
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        match &self.command {
            Command::Reconstruct { orders: Some(o), .. } => cfg.reconstruct_orders = o.clone(),
            Command::Residual { split: Some(s), .. } => cfg.residual_split = *s,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_field(path: &Path) -> Result<DensityField, CliError> {
    let raw = io::read_grid(BufReader::new(File::open(path)?))?;
    Ok(raw.into_density()?)
}

fn read_trajectory(path: &Path, cfg: &ExperimentConfig) -> Result<Trajectory, CliError> {
    Ok(io::read_trajectory(BufReader::new(File::open(path)?), cfg.dt, &cfg.domain()?)?)
}

/// Runs a command and returns the files written.
pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = OutputDir::create(&cfg.output_dir, &cfg.hash(), cfg.seed())?;
    match command {
        Command::ScoreSweep => {
            out.table("score_sweep.csv", &sweep_table(&cmd_score_sweep(cfg)?))?;
        }
        Command::Horizon => {
            let r = cmd_horizon(cfg)?;
            out.table("horizon.csv", &horizon_table(&r.rows))?;
            out.write_with("horizon_single_trajectory.csv", |w| Ok(io::write_trajectory(w, &r.single)?))?;
            out.write_with("horizon_composite_trajectory.csv", |w| Ok(io::write_trajectory(w, &r.composite)?))?;
        }
        Command::Reconstruct { field, trajectory, .. } => {
            let phi = match field {
                Some(p) => read_field(p)?,
                None => cfg.density(&cfg.eid)?,
            };
            let traj = match trajectory {
                Some(p) => read_trajectory(p, cfg)?,
                None => cmd_optimize(cfg)?.trajectory,
            };
            let r = cmd_reconstruct(&phi, &traj, &cfg.reconstruct_orders)?;
            out.write_with("reconstruct_source.grid", |w| Ok(io::write_grid(w, &phi)?))?;
            out.write_with("reconstruct_trajectory.csv", |w| Ok(io::write_trajectory(w, &traj)?))?;
            for (k, f) in &r.fields {
                out.write_with(&format!("reconstruct_k{k}.grid"), |w| Ok(io::write_grid(w, f)?))?;
            }
            out.table("reconstruct_error.csv", &reconstruct_table(&r.errors))?;
        }
        Command::Residual { field, trajectory, .. } => {
            let phi = match field {
                Some(p) => read_field(p)?,
                None => cfg.density(&cfg.residual_eid)?,
            };
            let traj = match trajectory {
                Some(p) => read_trajectory(p, cfg)?,
                None => residual_demo_trajectory(cfg)?,
            };
            let r = cmd_residual(&phi, &traj, cfg.residual_split, cfg.residual_k)?;
            out.write_with("residual_trajectory.csv", |w| Ok(io::write_trajectory(w, &traj)?))?;
            out.write_with("residual.grid", |w| Ok(io::write_grid(w, &r.field)?))?;
            out.table("residual_flagged.csv", &flagged_table(&r))?;
        }
        Command::Scenarios => {
            let r = cmd_scenarios()?;
            out.table("two_state.csv", &two_state_table(&r.two_state))?;
            out.table("two_post.csv", &two_post_table(&r.two_post))?;
        }
        Command::Optimize => {
            let r = cmd_optimize(cfg)?;
            out.write_with("optimize_trajectory.csv", |w| Ok(io::write_trajectory(w, &r.trajectory)?))?;
            out.write_with("optimize_report.csv", |w| Ok(io::write_report(w, &r)?))?;
        }
        Command::Simulate { trajectory } => {
            let traj = match trajectory {
                Some(p) => read_trajectory(p, cfg)?,
                None => cmd_optimize(cfg)?.trajectory,
            };
            let c = cmd_simulate(cfg, &traj)?;
            let grid = c.remaining.grid().clone();
            out.table("simulate.csv", &collection_table(&traj, &grid, &c))?;
            out.write_with("simulate_remaining.grid", |w| Ok(io::write_info_grid(w, &c.remaining)?))?;
        }
    }
    Ok(out.written().to_vec())
}
