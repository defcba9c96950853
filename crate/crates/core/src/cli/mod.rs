//! Command-line front end: maze ingestion plus the `plan`, `serve`, `drive`
//! and `compare` commands. Every command is a library function so it can be
//! scripted and tested without spawning a process.
//!
//! Exit codes: 0 ok, 2 bad input, 3 policy did not converge, 4 network,
//! 5 execution failure.

mod commands;
mod compare;
mod maze;

pub use commands::{
    cmd_drive, cmd_plan, cmd_serve, plan_for, serve_until, Algo, DriveOptions, DriveOutcome,
    PlanOptions, PlanOutcome, PlanSource, PlanTarget,
};
pub use compare::{
    cmd_compare, collect_mazes, BucketSummary, CompareOptions, CompareReport, CompareRow, MazeSource,
    COMPARE_HEADER,
};
pub use maze::{load_maze, parse_config, parse_maze, parse_text_maze, MazeConfig, MazeError};

use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::gridworld::Action;
use crate::pathcodec::decode_wire;
use crate::pathserver::{RetryPolicy, ADDR_ENV};
use crate::robotsim::{PidGains, RobotParams, TurnMode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Execution(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Maze(_) | CliError::Input(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Network(_) => 4,
            CliError::Execution(_) => 5,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Execution(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridpilot", version, about = "Plan, publish and drive grid-world routes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a learner (or run BFS) and emit the route in wire format.
    Plan(PlanArgs),
    /// Run the path service.
    Serve(ServeArgs),
    /// Execute a route in the robot simulator.
    Drive(DriveArgs),
    /// Time Q-learning against the DQN over a maze set.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Maze file: `.#SG` text grid or TOML config.
    #[arg(long)]
    pub maze: PathBuf,
    #[arg(long, value_enum, default_value = "q")]
    pub algo: Algo,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Write the wire JSON to this file.
    #[arg(long, conflicts_with = "url")]
    pub out: Option<PathBuf>,
    /// PUT the wire JSON to a running path service.
    #[arg(long)]
    pub url: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = ADDR_ENV, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Wire-format file to publish as the initial record.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DriveArgs {
    #[arg(long)]
    pub maze: PathBuf,
    /// Wire-format plan file.
    #[arg(long, conflicts_with = "url", required_unless_present = "url")]
    pub plan: Option<PathBuf>,
    /// Path service to fetch the plan from.
    #[arg(long)]
    pub url: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative std of wheel-speed noise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_parser = parse_turn_mode)]
    pub turn_mode: Option<TurnMode>,
    /// Seconds between plan refreshes while driving (URL source only).
    #[arg(long)]
    pub poll_interval: Option<f64>,
    /// Initial robot heading: left, up, right or down.
    #[arg(long, default_value = "up", value_parser = parse_heading)]
    pub heading: Action,
    /// Override the maximum wheel speed in rad/s.
    #[arg(long)]
    pub max_wheel_speed: Option<f64>,
    /// Directory for trajectory.csv and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Maze file or directory of mazes.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    pub maze: Option<PathBuf>,
    /// Generate this many random mazes instead.
    #[arg(long)]
    pub generate: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    #[arg(long, default_value_t = 5)]
    pub max_obstacles: usize,
    /// Training seeds per maze: `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// First training seed; also seeds maze generation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_turn_mode(s: &str) -> Result<TurnMode, String> {
    s.parse().map_err(|e: crate::robotsim::SimError| e.to_string())
}

fn parse_heading(s: &str) -> Result<Action, String> {
    match s.to_ascii_lowercase().as_str() {
        "left" | "0" => Ok(Action::Left),
        "up" | "1" => Ok(Action::Up),
        "right" | "2" => Ok(Action::Right),
        "down" | "3" => Ok(Action::Down),
        other => Err(format!("unknown heading `{other}`")),
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let mut out = io::stdout();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut (dyn Write + Send)) -> Result<u8, CliError> {
    match command {
        Command::Plan(a) => {
            let target = match (a.out, a.url) {
                (Some(path), _) => Some(PlanTarget::File(path)),
                (None, Some(url)) => Some(PlanTarget::Url(url)),
                (None, None) => None,
            };
            let opts = PlanOptions {
                maze: load_maze(&a.maze)?,
                algo: a.algo,
                seed: a.seed,
                episodes: a.episodes,
                target,
            };
            cmd_plan(&opts, out)?;
            Ok(0)
        }
        Command::Serve(a) => {
            let initial = match a.plan {
                Some(path) => {
                    let bytes = std::fs::read(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    Some(decode_wire(&bytes).map_err(|e| CliError::Input(e.to_string()))?)
                }
                None => None,
            };
            cmd_serve(&a.addr, initial, out)?;
            Ok(0)
        }
        Command::Drive(a) => {
            let mut params = RobotParams::default();
            if let Some(noise) = a.noise {
                params.speed_noise_std = noise;
            }
            if let Some(mode) = a.turn_mode {
                params.turn_mode = mode;
            }
            if let Some(speed) = a.max_wheel_speed {
                params.max_wheel_speed = speed;
            }
            let source = match (a.plan, a.url) {
                (Some(path), _) => PlanSource::File(path),
                (None, Some(url)) => PlanSource::Url(url),
                (None, None) => return Err(CliError::Input("one of --plan or --url is required".into())),
            };
            let poll_interval = match a.poll_interval {
                Some(s) if s.is_finite() && s > 0.0 => Some(Duration::from_secs_f64(s)),
                Some(s) => return Err(CliError::Input(format!("poll interval must be positive, got {s}"))),
                None => None,
            };
            let opts = DriveOptions {
                maze: load_maze(&a.maze)?,
                source,
                params,
                gains: PidGains::default(),
                seed: a.seed,
                initial_heading: a.heading,
                out_dir: a.out,
                poll_interval,
                retry: RetryPolicy::default(),
            };
            Ok(cmd_drive(&opts, out)?.exit_code())
        }
        Command::Compare(a) => {
            let source = match (a.maze, a.generate) {
                (Some(path), _) => MazeSource::Path(path),
                (None, Some(count)) => MazeSource::Generate {
                    count,
                    rows: a.rows,
                    cols: a.cols,
                    max_obstacles: a.max_obstacles,
                    seed: a.seed,
                },
                (None, None) => return Err(CliError::Input("one of --maze or --generate is required".into())),
            };
            let opts = CompareOptions {
                source,
                seeds: (a.seed..a.seed + a.seeds.max(1)).collect(),
                episodes: a.episodes,
            };
            let report = cmd_compare(&opts)?;
            match a.out {
                Some(path) => {
                    let file = std::fs::File::create(&path)
                        .map_err(|e| CliError::Execution(format!("{}: {e}", path.display())))?;
                    report.write_csv(file).map_err(|e| CliError::Execution(e.to_string()))?;
                }
                None => report.write_csv(&mut *out).map_err(|e| CliError::Execution(e.to_string()))?,
            }
            write!(out, "{report}")?;
            Ok(0)
        }
    }
}
