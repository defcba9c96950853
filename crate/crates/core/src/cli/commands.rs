use std::fs;
use std::future::Future;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use tokio::runtime::Runtime;

use super::maze::MazeConfig;
use super::CliError;
use crate::gridworld::{Action, Cell, GridSpec};
use crate::pathcodec::{decode_wire, encode_wire, PathPlan};
use crate::pathserver::{self, ClientError, PathClient, PathRecord, PollEvent, RetryPolicy};
use crate::qlearning::TrainStats;
use crate::robotsim::{self, PidGains, PlanRun, RobotParams};
use crate::{dqn, qlearning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Algo {
    /// Tabular Q-learning.
    Q,
    /// Deep Q-network.
    Dqn,
    /// Breadth-first search (exact shortest path).
    Bfs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanTarget {
    File(PathBuf),
    Url(String),
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    pub maze: MazeConfig,
    pub algo: Algo,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub target: Option<PlanTarget>,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub plan: PathPlan,
    pub stats: Option<TrainStats>,
    /// Version the server assigned when the plan was published.
    pub version: Option<u64>,
}

fn runtime() -> Result<Runtime, CliError> {
    Runtime::new().map_err(|e| CliError::Execution(format!("cannot start async runtime: {e}")))
}

/// Trains (or searches) and extracts a plan for `maze`.
pub fn plan_for(
    maze: &MazeConfig,
    algo: Algo,
    seed: Option<u64>,
    episodes: Option<usize>,
) -> Result<(PathPlan, Option<TrainStats>), CliError> {
    let spec = maze.valid_spec()?;
    match algo {
        Algo::Bfs => {
            let plan = spec
                .shortest_path_bfs()
                .map_err(|e| CliError::Input(e.to_string()))?
                .ok_or_else(|| CliError::Input("goal unreachable".into()))?;
            Ok((plan, None))
        }
        Algo::Q => {
            let mut hp = maze.q_hyperparams();
            hp.seed = seed.unwrap_or(hp.seed);
            hp.episodes = episodes.unwrap_or(hp.episodes);
            let (q, stats) = qlearning::train(&spec, &hp).map_err(|e| CliError::Input(e.to_string()))?;
            let plan = qlearning::extract_path(&q, &spec).map_err(|e| CliError::Convergence(e.to_string()))?;
            Ok((plan, Some(stats)))
        }
        Algo::Dqn => {
            let mut hp = maze.dqn_hyperparams();
            hp.seed = seed.unwrap_or(hp.seed);
            hp.episodes = episodes.unwrap_or(hp.episodes);
            let (net, stats) = dqn::train(&spec, &hp).map_err(|e| match e {
                dqn::DqnError::Diverged | dqn::DqnError::DivergedDuringTraining(_) => {
                    CliError::Convergence(e.to_string())
                }
                other => CliError::Input(other.to_string()),
            })?;
            let plan = dqn::extract_path(&net, &spec).map_err(|e| CliError::Convergence(e.to_string()))?;
            Ok((plan, Some(stats)))
        }
    }
}

/// Produces a plan and writes its wire bytes to a file or PUTs them to a server.
pub fn cmd_plan(opts: &PlanOptions, out: &mut dyn Write) -> Result<PlanOutcome, CliError> {
    let (plan, stats) = plan_for(&opts.maze, opts.algo, opts.seed, opts.episodes)?;
    let wire = encode_wire(&plan);
    let mut version = None;
    match &opts.target {
        Some(PlanTarget::File(path)) => write_file(path, &wire)?,
        Some(PlanTarget::Url(url)) => {
            let client = PathClient::new(url, RetryPolicy::default())?;
            version = runtime()?.block_on(client.put(&plan))?;
        }
        None => {}
    }
    writeln!(out, "plan: {plan}")?;
    writeln!(out, "length: {}", plan.len())?;
    writeln!(out, "wire: {}", String::from_utf8_lossy(&wire))?;
    if let Some(s) = &stats {
        writeln!(
            out,
            "training: {} episodes in {:.3} s, final return {:.1}, converged {}",
            s.episodes_run,
            s.wall_time,
            s.returns.last().copied().unwrap_or(f64::NAN),
            s.converged
        )?;
    }
    if let Some(v) = version {
        writeln!(out, "published version {v}")?;
    }
    Ok(PlanOutcome { plan, stats, version })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Execution(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Execution(format!("{}: {e}", path.display())))
}

/// Serves until `shutdown` resolves. Prints the bound address first.
pub async fn serve_until(
    addr: &str,
    initial: Option<PathPlan>,
    shutdown: impl Future<Output = ()>,
    out: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let record = initial.map(|p| PathRecord::from_plan(&p, 1));
    let handle = pathserver::serve(addr, record)
        .await
        .map_err(|e| CliError::Network(e.to_string()))?;
    writeln!(out, "listening on {}", handle.base_url())?;
    out.flush()?;
    shutdown.await;
    handle.shutdown().await.map_err(|e| CliError::Network(e.to_string()))?;
    // best effort: the server already stopped cleanly
    let _ = writeln!(out, "stopped");
    Ok(())
}

/// Runs the path service until interrupted with Ctrl-C.
pub fn cmd_serve(addr: &str, initial: Option<PathPlan>, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    runtime()?.block_on(serve_until(
        addr,
        initial,
        async {
            let _ = tokio::signal::ctrl_c().await;
        },
        out,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanSource {
    File(PathBuf),
    Url(String),
}

#[derive(Debug, Clone)]
pub struct DriveOptions {
    pub maze: MazeConfig,
    pub source: PlanSource,
    pub params: RobotParams,
    pub gains: PidGains,
    pub seed: u64,
    pub initial_heading: Action,
    /// Directory for `trajectory.csv` and `summary.json`.
    pub out_dir: Option<PathBuf>,
    /// When set with a URL source, newer plans are adopted between primitives.
    pub poll_interval: Option<Duration>,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone)]
pub struct DriveOutcome {
    pub run: PlanRun,
    /// Cell the grid environment reaches with the same plan.
    pub replay_cell: Cell,
    /// The plan enters an obstacle or the robot and the grid disagree.
    pub discrepancy: bool,
}

impl DriveOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.run.success {
            0
        } else {
            5
        }
    }
}

/// Obtains a plan, drives it in the simulator and writes the run artefacts.
pub fn cmd_drive(opts: &DriveOptions, out: &mut dyn Write) -> Result<DriveOutcome, CliError> {
    let spec = opts.maze.valid_spec()?;
    opts.params.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let (run, plan) = match &opts.source {
        PlanSource::File(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let plan = decode_wire(&bytes).map_err(|e| CliError::Input(e.to_string()))?;
            (simulate(&spec, &plan, opts, || None)?, plan)
        }
        PlanSource::Url(url) => drive_from_server(&spec, url, opts, out)?,
    };

    let replay = spec
        .replay(&plan, &opts.maze.rewards)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let replay_cell = *replay.last().unwrap_or(&spec.start);
    let enters_obstacle = run.plan_updates == 0 && replay.iter().any(|c| spec.is_obstacle(*c));
    let discrepancy = enters_obstacle || (run.plan_updates == 0 && run.final_cell != Some(replay_cell));

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::Execution(format!("{}: {e}", dir.display())))?;
        let csv_path = dir.join("trajectory.csv");
        let file = fs::File::create(&csv_path)
            .map_err(|e| CliError::Execution(format!("{}: {e}", csv_path.display())))?;
        run.write_trajectory_csv(std::io::BufWriter::new(file))
            .map_err(|e| CliError::Execution(e.to_string()))?;
        let summary = serde_json::to_vec_pretty(&run.summary()).expect("summary serialises");
        write_file(&dir.join("summary.json"), &summary)?;
    }

    let cell = run.final_cell.map_or("off-grid".to_string(), |c| c.to_string());
    writeln!(out, "plan: {plan}")?;
    writeln!(
        out,
        "final cell {cell} (goal {}), {} primitives, success {}",
        spec.goal, run.primitives_executed, run.success
    )?;
    if let Some(stall) = &run.stall {
        writeln!(out, "{stall}")?;
    }
    if enters_obstacle {
        writeln!(out, "warning: plan drives through an obstacle cell")?;
    } else if discrepancy {
        writeln!(out, "warning: robot ended in {cell} but the grid replay ends in {replay_cell}")?;
    }
    Ok(DriveOutcome {
        run,
        replay_cell,
        discrepancy,
    })
}

fn simulate(
    spec: &GridSpec,
    plan: &PathPlan,
    opts: &DriveOptions,
    updates: impl FnMut() -> Option<PathPlan>,
) -> Result<PlanRun, CliError> {
    robotsim::execute_plan_with_updates(
        spec,
        plan,
        opts.initial_heading,
        &opts.params,
        &opts.gains,
        opts.seed,
        updates,
    )
    .map_err(|e| CliError::Input(e.to_string()))
}

fn drive_from_server(
    spec: &GridSpec,
    url: &str,
    opts: &DriveOptions,
    out: &mut dyn Write,
) -> Result<(PlanRun, PathPlan), CliError> {
    let rt = runtime()?;
    let client = PathClient::new(url, opts.retry)?;
    let first = rt.block_on(client.fetch())?;
    let Some(interval) = opts.poll_interval else {
        let run = simulate(spec, &first.plan, opts, || None)?;
        return Ok((run, first.plan));
    };

    let _guard = rt.enter();
    let mut poller = pathserver::spawn_poller(client, interval);
    let mut seen = first.version;
    let mut latest = first.plan.clone();
    let mut notes = Vec::new();
    let run = simulate(spec, &first.plan, opts, || {
        let mut newest = None;
        while let Ok(event) = poller.events.try_recv() {
            match event {
                PollEvent::Updated(vp) if vp.version != seen || vp.version.is_none() && vp.plan != latest => {
                    seen = vp.version;
                    latest = vp.plan.clone();
                    newest = Some(vp.plan);
                }
                PollEvent::Updated(_) => {}
                PollEvent::Failed(e) => notes.push(format!("poll failed: {e}")),
            }
        }
        newest
    })?;
    poller.stop();
    for note in notes {
        writeln!(out, "{note}")?;
    }
    Ok((run, latest))
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::InvalidUrl(_) => CliError::Input(e.to_string()),
            _ => CliError::Network(e.to_string()),
        }
    }
}
