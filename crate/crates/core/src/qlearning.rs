//! Tabular Q-learning over a [`GridSpec`].

use std::fmt::Write as _;
use std::io;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{Action, GridError, GridSpec, RewardSchedule};
use crate::pathcodec::PathPlan;
use crate::policy::{self, PolicyError};
use crate::seeded_rng;

/// Final-episode window used by [`TrainStats::converged`].
pub const CONVERGENCE_WINDOW: usize = 10;
/// Largest single-entry change allowed inside the window for convergence.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("state {state} or action out of range for a table of {states} states")]
    OutOfRange { state: usize, states: usize },
    #[error("non-finite input to bellman update")]
    NonFinite,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `states x 4` matrix of action values.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<[f64; 4]>,
}

impl QTable {
    pub fn zeros(states: usize) -> Self {
        Self {
            values: vec![[0.0; 4]; states],
        }
    }

    pub fn for_spec(spec: &GridSpec) -> Self {
        Self::zeros(spec.state_count())
    }

    pub fn from_rows(values: Vec<[f64; 4]>) -> Self {
        Self { values }
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, state: usize) -> &[f64; 4] {
        &self.values[state]
    }

    pub fn rows(&self) -> &[[f64; 4]] {
        &self.values
    }

    pub fn get(&self, state: usize, action: Action) -> f64 {
        self.values[state][action.index()]
    }

    pub fn set(&mut self, state: usize, action: Action, value: f64) {
        self.values[state][action.index()] = value;
    }

    pub fn max_value(&self, state: usize) -> f64 {
        self.values[state].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action, ties to the lowest code.
    pub fn best_action(&self, state: usize) -> Action {
        Action::ALL[policy::argmax(&self.values[state])]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// One backup of `Q(s,a)` toward `r` (terminal) or `r + gamma * max Q(s',.)`.
    /// Returns the absolute change applied.
    pub fn bellman_update(
        &mut self,
        state: usize,
        action: Action,
        reward: f64,
        next_state: usize,
        terminal: bool,
        alpha: f64,
        gamma: f64,
    ) -> Result<f64, QError> {
        let states = self.states();
        if state >= states || next_state >= states {
            return Err(QError::OutOfRange {
                state: state.max(next_state),
                states,
            });
        }
        if !reward.is_finite() || !alpha.is_finite() || !gamma.is_finite() {
            return Err(QError::NonFinite);
        }
        let target = if terminal {
            reward
        } else {
            reward + gamma * self.max_value(next_state)
        };
        let current = self.values[state][action.index()];
        let delta = alpha * (target - current);
        if !delta.is_finite() {
            return Err(QError::NonFinite);
        }
        self.values[state][action.index()] = current + delta;
        Ok(delta.abs())
    }

    /// Plain-text dump: one line per state, four space-separated values
    /// printed with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let _ = writeln!(out, "{:?} {:?} {:?} {:?}", row[0], row[1], row[2], row[3]);
        }
        out
    }
}

/// Uniform random action with probability `epsilon`, greedy otherwise.
pub fn select_action<R: Rng + ?Sized>(q: &QTable, state: usize, epsilon: f64, rng: &mut R) -> Action {
    policy::epsilon_greedy(q.row(state), epsilon, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Per-episode multiplier.
    pub decay: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay: 0.995,
        }
    }
}

impl EpsilonSchedule {
    pub fn next(&self, epsilon: f64) -> f64 {
        (epsilon * self.decay).max(self.end)
    }

    pub fn check(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.start) || !(0.0..=1.0).contains(&self.end) {
            return Err("epsilon bounds must lie in [0, 1]".into());
        }
        if self.end > self.start {
            return Err("epsilon end exceeds epsilon start".into());
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err("epsilon decay must lie in (0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QHyperparams {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub episodes: usize,
    /// Defaults to `4 * rows * cols` when unset.
    pub max_steps_per_episode: Option<usize>,
    pub rewards: RewardSchedule,
    pub seed: u64,
}

impl Default for QHyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.9,
            epsilon: EpsilonSchedule::default(),
            episodes: 500,
            max_steps_per_episode: None,
            rewards: RewardSchedule::default(),
            seed: 0,
        }
    }
}

impl QHyperparams {
    pub fn check(&self) -> Result<(), QError> {
        let bad = |m: &str| Err(QError::Hyperparams(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.episodes == 0 {
            return bad("episodes must be positive");
        }
        if self.max_steps_per_episode == Some(0) {
            return bad("max_steps_per_episode must be positive");
        }
        if !self.rewards.is_valid() {
            return bad("reward schedule must satisfy obstacle < step < goal");
        }
        self.epsilon.check().map_err(QError::Hyperparams)
    }

    pub fn max_steps(&self, spec: &GridSpec) -> usize {
        self.max_steps_per_episode.unwrap_or(4 * spec.state_count())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainStats {
    pub episodes_run: usize,
    pub wall_time: f64,
    pub returns: Vec<f64>,
    /// Exploration rate used during each episode.
    pub epsilons: Vec<f64>,
    pub converged: bool,
}

impl TrainStats {
    /// CSV with header `episode,return,epsilon`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["episode", "return", "epsilon"])?;
        for (i, (ret, eps)) in self.returns.iter().zip(&self.epsilons).enumerate() {
            w.write_record([i.to_string(), ret.to_string(), eps.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `hp.episodes` epsilon-greedy episodes from the start cell.
pub fn train(spec: &GridSpec, hp: &QHyperparams) -> Result<(QTable, TrainStats), QError> {
    spec.ensure_valid()?;
    hp.check()?;
    let started = Instant::now();
    let mut rng = seeded_rng(hp.seed);
    let mut q = QTable::for_spec(spec);
    let max_steps = hp.max_steps(spec);
    let mut epsilon = hp.epsilon.start;
    let mut stats = TrainStats::default();
    let mut window_max: Vec<f64> = Vec::with_capacity(hp.episodes);

    for _ in 0..hp.episodes {
        let mut state = spec.start;
        let mut ret = 0.0;
        let mut max_delta: f64 = 0.0;
        for _ in 0..max_steps {
            let s = spec.state_index(state)?;
            let action = select_action(&q, s, epsilon, &mut rng);
            let step = spec.step(state, action, &hp.rewards)?;
            let s_next = spec.state_index(step.next)?;
            let delta =
                q.bellman_update(s, action, step.reward, s_next, step.terminal, hp.alpha, hp.gamma)?;
            max_delta = max_delta.max(delta);
            ret += step.reward;
            if step.terminal {
                break;
            }
            state = step.next;
        }
        stats.returns.push(ret);
        stats.epsilons.push(epsilon);
        window_max.push(max_delta);
        epsilon = hp.epsilon.next(epsilon);
    }

    stats.episodes_run = hp.episodes;
    stats.converged = window_max.len() >= CONVERGENCE_WINDOW
        && window_max[window_max.len() - CONVERGENCE_WINDOW..]
            .iter()
            .all(|&d| d < CONVERGENCE_TOLERANCE);
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok((q, stats))
}

/// Greedy rollout of the table from start.
pub fn extract_path(q: &QTable, spec: &GridSpec) -> Result<PathPlan, PolicyError> {
    if q.states() != spec.state_count() {
        return Err(PolicyError::Grid(GridError::IndexOutOfRange {
            index: q.states(),
            states: spec.state_count(),
        }));
    }
    policy::greedy_rollout(spec, |cell| {
        let s = spec.state_index(cell).expect("rollout stays in bounds");
        q.best_action(s)
    })
}
