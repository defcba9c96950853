//! Greedy rollout shared by the tabular and neural learners.

use thiserror::Error;

use crate::gridworld::{Action, Cell, GridError, GridSpec, RewardSchedule};
use crate::pathcodec::PathPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy-not-converged: greedy rollout revisits {0}")]
    NotConverged(Cell),
    #[error("policy-unsafe: greedy rollout enters obstacle {0}")]
    Unsafe(Cell),
    #[error("policy-not-converged: greedy rollout exceeded {0} steps")]
    TooLong(usize),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Uniform random action with probability `epsilon`, otherwise the argmax of
/// `values`. Always consumes one uniform draw, plus one more when exploring.
pub fn epsilon_greedy<R: rand::Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> Action {
    if rng.random::<f64>() < epsilon {
        Action::ALL[rng.random_range(0..4)]
    } else {
        Action::ALL[argmax(values)]
    }
}

/// Follows `choose` from start until the goal. Fails on a revisited state,
/// an obstacle entry, or more than `rows * cols` steps.
pub fn greedy_rollout(
    spec: &GridSpec,
    mut choose: impl FnMut(Cell) -> Action,
) -> Result<PathPlan, PolicyError> {
    spec.ensure_valid()?;
    let rewards = RewardSchedule::default();
    let limit = spec.state_count();
    let mut visited = vec![false; limit];
    let mut state = spec.start;
    let mut actions = Vec::new();
    visited[spec.state_index(state)?] = true;
    loop {
        if actions.len() >= limit {
            return Err(PolicyError::TooLong(limit));
        }
        let action = choose(state);
        actions.push(action);
        let step = spec.step(state, action, &rewards)?;
        if spec.is_obstacle(step.next) {
            return Err(PolicyError::Unsafe(step.next));
        }
        if step.next == spec.goal {
            return Ok(PathPlan::new(actions).expect("at least one action"));
        }
        let idx = spec.state_index(step.next)?;
        if visited[idx] {
            return Err(PolicyError::NotConverged(step.next));
        }
        visited[idx] = true;
        state = step.next;
    }
}
