//! Deep Q-learning with a from-scratch MLP, uniform experience replay and a
//! periodically synchronised target network.
//!
//! States are fed to the network one-hot, so a `[m, hidden, 4]` network is a
//! strict generalisation of the `m x 4` Q-table. The loss for a batch is the
//! mean squared error between the main network's value for the taken action
//! and the regression target
//!
//! ```text
//! y = r                                  if done
//! y = r + gamma * max_a' target(s')[a']  otherwise
//! ```
//!
//! Only the taken action's output unit receives gradient. Parameters are
//! updated with one step of plain gradient descent per batch.

mod mlp;
mod replay;

pub use mlp::{ForwardTrace, Layer, Mlp};
pub use replay::{Experience, ReplayBuffer};

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridworld::{GridError, GridSpec, RewardSchedule};
use crate::pathcodec::PathPlan;
use crate::policy::{self, PolicyError};
use crate::qlearning::{EpsilonSchedule, TrainStats};
use crate::{seeded_rng, Action};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DqnError {
    #[error("input has {got} entries, network expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("architecture mismatch: {0}")]
    Architecture(String),
    #[error("state {state} is outside [0, {states})")]
    StateOutOfRange { state: usize, states: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("diverged: non-finite loss")]
    Diverged,
    #[error("diverged: non-finite loss after {} episodes", .0.episodes_run)]
    DivergedDuringTraining(Box<TrainStats>),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnHyperparams {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Environment steps between target-network copies.
    pub sync_interval: usize,
    pub episodes: usize,
    pub epsilon: EpsilonSchedule,
    pub min_buffer_before_training: usize,
    pub buffer_capacity: usize,
    pub hidden: usize,
    /// Defaults to `4 * rows * cols` when unset.
    pub max_steps_per_episode: Option<usize>,
    pub rewards: RewardSchedule,
    pub seed: u64,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.01,
            batch_size: 32,
            sync_interval: 100,
            episodes: 800,
            epsilon: EpsilonSchedule::default(),
            min_buffer_before_training: 200,
            buffer_capacity: 10_000,
            hidden: 64,
            max_steps_per_episode: None,
            rewards: RewardSchedule::default(),
            seed: 0,
        }
    }
}

impl DqnHyperparams {
    pub fn check(&self) -> Result<(), DqnError> {
        let bad = |m: &str| Err(DqnError::Hyperparams(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad("batch size must lie in [1, buffer capacity]");
        }
        if self.sync_interval == 0 || self.episodes == 0 || self.hidden == 0 {
            return bad("sync interval, episodes and hidden width must be positive");
        }
        if self.max_steps_per_episode == Some(0) {
            return bad("max_steps_per_episode must be positive");
        }
        if !self.rewards.is_valid() {
            return bad("reward schedule must satisfy obstacle < step < goal");
        }
        self.epsilon.check().map_err(DqnError::Hyperparams)
    }

    pub fn max_steps(&self, spec: &GridSpec) -> usize {
        self.max_steps_per_episode.unwrap_or(4 * spec.state_count())
    }
}

pub fn encode_state(state: usize, states: usize) -> Result<Vec<f64>, DqnError> {
    if state >= states {
        return Err(DqnError::StateOutOfRange { state, states });
    }
    let mut v = vec![0.0; states];
    v[state] = 1.0;
    Ok(v)
}

/// Batch loss and its gradient with respect to every parameter of `main`.
pub fn loss_and_gradient(
    main: &Mlp,
    target: &Mlp,
    batch: &[Experience],
    gamma: f64,
) -> Result<(f64, Mlp), DqnError> {
    if batch.is_empty() {
        return Err(DqnError::EmptyBatch);
    }
    let states = main.input_dim();
    let n = batch.len() as f64;
    let mut grads = main.zeros_like();
    let mut loss = 0.0;
    for exp in batch {
        let y = if exp.done {
            exp.reward
        } else {
            let next = target.forward(&encode_state(exp.next_state, states)?)?;
            exp.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let trace = main.forward_trace(&encode_state(exp.state, states)?)?;
        let err = trace.output()[exp.action.index()] - y;
        loss += err * err / n;
        let mut grad_out = vec![0.0; main.output_dim()];
        grad_out[exp.action.index()] = 2.0 * err / n;
        main.backward(&trace, &grad_out, &mut grads);
    }
    Ok((loss, grads))
}

/// One gradient-descent step on `main`. Returns the pre-update loss.
pub fn train_step(
    main: &mut Mlp,
    target: &Mlp,
    batch: &[Experience],
    gamma: f64,
    learning_rate: f64,
) -> Result<f64, DqnError> {
    let (loss, grads) = loss_and_gradient(main, target, batch, gamma)?;
    if !loss.is_finite() {
        return Err(DqnError::Diverged);
    }
    if learning_rate != 0.0 {
        main.add_scaled(-learning_rate, &grads);
    }
    if !main.is_finite() {
        return Err(DqnError::Diverged);
    }
    Ok(loss)
}

/// Copies `main` into `target`.
pub fn sync_target(main: &Mlp, target: &mut Mlp) -> Result<(), DqnError> {
    target.copy_from(main)
}

pub fn q_values(net: &Mlp, state: usize) -> Result<Vec<f64>, DqnError> {
    net.forward(&encode_state(state, net.input_dim())?)
}

/// Trains a `[m, hidden, 4]` network on `spec`.
///
/// `converged` in the returned stats reports whether the final greedy policy
/// reaches the goal.
pub fn train(spec: &GridSpec, hp: &DqnHyperparams) -> Result<(Mlp, TrainStats), DqnError> {
    spec.ensure_valid()?;
    hp.check()?;
    let started = Instant::now();
    let mut rng = seeded_rng(hp.seed);
    let m = spec.state_count();
    let mut main = Mlp::new(&[m, hp.hidden, 4], &mut rng)?;
    let mut target = main.clone();
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let warmup = hp.min_buffer_before_training.max(hp.batch_size);
    let max_steps = hp.max_steps(spec);
    let mut epsilon = hp.epsilon.start;
    let mut stats = TrainStats::default();
    let mut total_steps: usize = 0;

    for _ in 0..hp.episodes {
        let mut state = spec.start;
        let mut ret = 0.0;
        for _ in 0..max_steps {
            let s = spec.state_index(state)?;
            let values = q_values(&main, s)?;
            let action = policy::epsilon_greedy(&values, epsilon, &mut rng);
            let step = spec.step(state, action, &hp.rewards)?;
            buffer.push(Experience {
                state: s,
                action,
                reward: step.reward,
                next_state: spec.state_index(step.next)?,
                done: step.terminal,
            });
            ret += step.reward;
            if buffer.len() >= warmup {
                let batch = buffer.sample(hp.batch_size, &mut rng);
                if let Err(e) = train_step(&mut main, &target, &batch, hp.gamma, hp.learning_rate) {
                    return Err(match e {
                        DqnError::Diverged => {
                            stats.wall_time = started.elapsed().as_secs_f64();
                            DqnError::DivergedDuringTraining(Box::new(stats))
                        }
                        other => other,
                    });
                }
            }
            total_steps += 1;
            if total_steps % hp.sync_interval == 0 {
                sync_target(&main, &mut target)?;
            }
            if step.terminal {
                break;
            }
            state = step.next;
        }
        stats.returns.push(ret);
        stats.epsilons.push(epsilon);
        stats.episodes_run += 1;
        epsilon = hp.epsilon.next(epsilon);
    }

    stats.converged = extract_path(&main, spec).is_ok();
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok((main, stats))
}

/// Greedy rollout using the network's argmax action.
pub fn extract_path(net: &Mlp, spec: &GridSpec) -> Result<PathPlan, PolicyError> {
    if net.input_dim() != spec.state_count() || net.output_dim() != 4 {
        return Err(PolicyError::Grid(GridError::IndexOutOfRange {
            index: net.input_dim(),
            states: spec.state_count(),
        }));
    }
    policy::greedy_rollout(spec, |cell| {
        let s = spec.state_index(cell).expect("rollout stays in bounds");
        let values = q_values(net, s).expect("dimensions checked above");
        Action::ALL[policy::argmax(&values)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::Cell;

    #[test]
    fn one_hot_encoding() {
        assert_eq!(encode_state(0, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(encode_state(3, 4).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(encode_state(4, 4).is_err());
        for s in 0..7 {
            let v = encode_state(s, 7).unwrap();
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 1);
        }
    }

    #[test]
    fn terminal_sample_on_zero_nets() {
        let mut main = Mlp::zeros(&[4, 3, 4]).unwrap();
        let target = main.clone();
        let batch = [Experience { state: 1, action: Action::Right, reward: 7.0, next_state: 2, done: true }];
        let loss = train_step(&mut main, &target, &batch, 0.9, 0.01).unwrap();
        assert_eq!(loss, 49.0);
    }

    #[test]
    fn zero_learning_rate_leaves_main_unchanged() {
        let mut rng = seeded_rng(9);
        let mut main = Mlp::new(&[4, 6, 4], &mut rng).unwrap();
        let target = Mlp::new(&[4, 6, 4], &mut rng).unwrap();
        let before = main.clone();
        let batch = [Experience { state: 0, action: Action::Up, reward: -1.0, next_state: 1, done: false }];
        let loss = train_step(&mut main, &target, &batch, 0.9, 0.0).unwrap();
        assert!(loss > 0.0);
        assert_eq!(main, before);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut main = Mlp::zeros(&[4, 3, 4]).unwrap();
        let target = main.clone();
        assert_eq!(train_step(&mut main, &target, &[], 0.9, 0.01), Err(DqnError::EmptyBatch));
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let mut rng = seeded_rng(2);
        let mut main = Mlp::new(&[4, 8, 4], &mut rng).unwrap();
        let target = main.clone();
        let batch = [Experience { state: 0, action: Action::Up, reward: 1e200, next_state: 1, done: true }];
        let mut result = Ok(0.0);
        for _ in 0..10 {
            result = train_step(&mut main, &target, &batch, 0.9, 1e100);
            if result.is_err() {
                break;
            }
        }
        assert_eq!(result, Err(DqnError::Diverged));
    }

    #[test]
    fn sync_copies_and_decouples() {
        let mut rng = seeded_rng(4);
        let main = Mlp::new(&[5, 7, 4], &mut rng).unwrap();
        let mut target = Mlp::zeros(&[5, 7, 4]).unwrap();
        sync_target(&main, &mut target).unwrap();
        assert_eq!(main, target);
        let snapshot = target.clone();
        let mut main = main;
        main.params_mut().for_each(|p| *p += 1.0);
        assert_eq!(target, snapshot);
        sync_target(&main, &mut target).unwrap();
        let once = target.clone();
        sync_target(&main, &mut target).unwrap();
        assert_eq!(target, once);
        let mut wrong = Mlp::zeros(&[5, 6, 4]).unwrap();
        assert!(matches!(sync_target(&main, &mut wrong), Err(DqnError::Architecture(_))));
    }

    #[test]
    fn zero_network_policy_cycles() {
        let spec = GridSpec::new(2, 2, (0, 0), (1, 1), []);
        let net = Mlp::zeros(&[4, 64, 4]).unwrap();
        assert_eq!(extract_path(&net, &spec), Err(PolicyError::NotConverged(Cell::new(0, 0))));
    }

    #[test]
    fn single_move_grid_learns_right() {
        let spec = GridSpec::new(1, 2, (0, 0), (0, 1), []);
        let (net, _) = train(&spec, &DqnHyperparams::default()).unwrap();
        let q = q_values(&net, 0).unwrap();
        assert_eq!(Action::ALL[policy::argmax(&q)], Action::Right);
    }
}
