//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gridpilot::gridworld::{Action, Cell, GridSpec, RewardSchedule};

/// Value iteration over the same transition rules as `GridSpec::step`,
/// written out by hand, iterated until the largest change is below `tol`.
pub fn value_iteration(spec: &GridSpec, rewards: &RewardSchedule, gamma: f64, tol: f64) -> Vec<[f64; 4]> {
    let m = spec.rows * spec.cols;
    let mut q = vec![[0.0f64; 4]; m];
    loop {
        let mut next = q.clone();
        let mut change: f64 = 0.0;
        for r in 0..spec.rows {
            for c in 0..spec.cols {
                let here = Cell::new(r, c);
                if here == spec.goal || spec.obstacles.contains(&here) {
                    continue;
                }
                let s = r * spec.cols + c;
                for (a, (dr, dc)) in [(0i64, -1i64), (-1, 0), (0, 1), (1, 0)].into_iter().enumerate() {
                    let nr = r as i64 + dr;
                    let nc = c as i64 + dc;
                    let value = if nr < 0 || nc < 0 || nr >= spec.rows as i64 || nc >= spec.cols as i64 {
                        rewards.step_reward + gamma * q[s].iter().copied().fold(f64::MIN, f64::max)
                    } else {
                        let n = Cell::new(nr as usize, nc as usize);
                        if spec.obstacles.contains(&n) {
                            rewards.obstacle_reward
                        } else if n == spec.goal {
                            rewards.goal_reward
                        } else {
                            let ns = n.row * spec.cols + n.col;
                            rewards.step_reward + gamma * q[ns].iter().copied().fold(f64::MIN, f64::max)
                        }
                    };
                    change = change.max((value - q[s][a]).abs());
                    next[s][a] = value;
                }
            }
        }
        q = next;
        if change < tol {
            return q;
        }
    }
}

/// Length of the shortest obstacle-free path, found by enumerating every
/// simple path from start with depth-first search.
pub fn brute_force_shortest(spec: &GridSpec) -> Option<usize> {
    fn dfs(spec: &GridSpec, at: Cell, visited: &mut Vec<Cell>, best: &mut Option<usize>) {
        if at == spec.goal {
            let len = visited.len() - 1;
            if best.map_or(true, |b| len < b) {
                *best = Some(len);
            }
            return;
        }
        for (dr, dc) in [(0i64, -1i64), (-1, 0), (0, 1), (1, 0)] {
            let nr = at.row as i64 + dr;
            let nc = at.col as i64 + dc;
            if nr < 0 || nc < 0 || nr >= spec.rows as i64 || nc >= spec.cols as i64 {
                continue;
            }
            let n = Cell::new(nr as usize, nc as usize);
            if spec.obstacles.contains(&n) || visited.contains(&n) {
                continue;
            }
            visited.push(n);
            dfs(spec, n, visited, best);
            visited.pop();
        }
    }
    let mut best = None;
    dfs(spec, spec.start, &mut vec![spec.start], &mut best);
    best
}

const DELTAS: [(i64, i64); 4] = [(0, -1), (-1, 0), (0, 1), (1, 0)];

fn offset(spec: &GridSpec, cell: Cell, code: usize) -> Option<Cell> {
    let (dr, dc) = DELTAS[code];
    let nr = cell.row as i64 + dr;
    let nc = cell.col as i64 + dc;
    (nr >= 0 && nc >= 0 && nr < spec.rows as i64 && nc < spec.cols as i64).then(|| Cell::new(nr as usize, nc as usize))
}

/// Cell reached by folding raw action deltas from start: off-grid moves
/// stay put, and entering an obstacle or the goal ends the walk.
pub fn fold_cells(spec: &GridSpec, actions: &[Action]) -> Cell {
    let mut cell = spec.start;
    for &a in actions {
        if let Some(n) = offset(spec, cell, a.code() as usize) {
            cell = n;
            if n == spec.goal || spec.obstacles.contains(&n) {
                break;
            }
        }
    }
    cell
}

/// Random walk of up to `max_len` moves that never leaves the grid or
/// enters an obstacle, ending early if it reaches the goal.
pub fn random_walk<R: rand::Rng>(spec: &GridSpec, max_len: usize, rng: &mut R) -> Vec<Action> {
    let len = rng.random_range(1..=max_len);
    let mut cell = spec.start;
    let mut actions = Vec::with_capacity(len);
    for _ in 0..len {
        let options: Vec<(usize, Cell)> = (0..4)
            .filter_map(|code| offset(spec, cell, code).map(|n| (code, n)))
            .filter(|(_, n)| !spec.obstacles.contains(n))
            .collect();
        let (code, next) = options[rng.random_range(0..options.len())];
        actions.push(Action::from_code(code as u8).unwrap());
        cell = next;
        if cell == spec.goal {
            break;
        }
    }
    actions
}

/// Largest relative error between backpropagated and central-difference
/// gradients of `L = sum_k w_k * out_k` with respect to every parameter.
/// Relative error is `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn gradient_check(net: &gridpilot::dqn::Mlp, input: &[f64], weights: &[f64], eps: f64) -> f64 {
    let loss = |n: &gridpilot::dqn::Mlp| -> f64 {
        n.forward(input).unwrap().iter().zip(weights).map(|(o, w)| o * w).sum()
    };
    let mut grads = net.zeros_like();
    let trace = net.forward_trace(input).unwrap();
    net.backward(&trace, weights, &mut grads);
    let analytic: Vec<f64> = grads.params().copied().collect();

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let original = *probe.params().nth(i).unwrap();
        *probe.params_mut().nth(i).unwrap() = original + eps;
        let up = loss(&probe);
        *probe.params_mut().nth(i).unwrap() = original - eps;
        let down = loss(&probe);
        *probe.params_mut().nth(i).unwrap() = original;
        let numeric = (up - down) / (2.0 * eps);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
