//! Discrete grid environment shared by both learners and the simulator.
//!
//! Row 0 is the top row. `UP` decrements the row, `DOWN` increments it,
//! `LEFT` decrements the column and `RIGHT` increments it. Moves off the
//! grid leave the agent in place; moves into an obstacle end the episode.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathcodec::PathPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

impl From<(usize, usize)> for Cell {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// The four grid moves. Discriminants are the wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Action {
    Left = 0,
    Up = 1,
    Right = 2,
    Down = 3,
}

impl Action {
    /// All actions in ascending code order. Tie-breaks everywhere follow this order.
    pub const ALL: [Action; 4] = [Action::Left, Action::Up, Action::Right, Action::Down];

    pub const fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Action::Left),
            1 => Some(Action::Up),
            2 => Some(Action::Right),
            3 => Some(Action::Down),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// (row delta, col delta) of one move.
    pub const fn delta(self) -> (i64, i64) {
        match self {
            Action::Left => (0, -1),
            Action::Up => (-1, 0),
            Action::Right => (0, 1),
            Action::Down => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Left => "LEFT",
            Action::Up => "UP",
            Action::Right => "RIGHT",
            Action::Down => "DOWN",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSchedule {
    pub step_reward: f64,
    pub goal_reward: f64,
    pub obstacle_reward: f64,
}

impl Default for RewardSchedule {
    fn default() -> Self {
        Self {
            step_reward: -1.0,
            goal_reward: 100.0,
            obstacle_reward: -100.0,
        }
    }
}

impl RewardSchedule {
    pub fn is_valid(&self) -> bool {
        [self.step_reward, self.goal_reward, self.obstacle_reward]
            .iter()
            .all(|r| r.is_finite())
            && self.goal_reward > self.step_reward
            && self.obstacle_reward < self.step_reward
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next: Cell,
    pub reward: f64,
    pub terminal: bool,
}

/// A single broken invariant of a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGrid,
    StartOutOfBounds(Cell),
    GoalOutOfBounds(Cell),
    ObstacleOutOfBounds(Cell),
    StartEqualsGoal,
    StartOnObstacle,
    GoalOnObstacle,
    UnreachableGoal,
}

impl Violation {
    /// Stable kebab-case tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Violation::EmptyGrid => "empty-grid",
            Violation::StartOutOfBounds(_) => "start-out-of-bounds",
            Violation::GoalOutOfBounds(_) => "goal-out-of-bounds",
            Violation::ObstacleOutOfBounds(_) => "obstacle-out-of-bounds",
            Violation::StartEqualsGoal => "start-equals-goal",
            Violation::StartOnObstacle => "start-on-obstacle",
            Violation::GoalOnObstacle => "goal-on-obstacle",
            Violation::UnreachableGoal => "unreachable-goal",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::StartOutOfBounds(c)
            | Violation::GoalOutOfBounds(c)
            | Violation::ObstacleOutOfBounds(c) => write!(f, "{} {}", self.tag(), c),
            _ => f.write_str(self.tag()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cell {cell} is outside the {rows}x{cols} grid")]
    OutOfBounds { cell: Cell, rows: usize, cols: usize },
    #[error("state index {index} is outside [0, {states})")]
    IndexOutOfRange { index: usize, states: usize },
    #[error("cannot step from {0}: it is an obstacle")]
    FromObstacle(Cell),
    #[error("cannot step from the goal cell {0}")]
    FromGoal(Cell),
    #[error("invalid grid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub goal: Cell,
    pub obstacles: BTreeSet<Cell>,
}

impl GridSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        start: impl Into<Cell>,
        goal: impl Into<Cell>,
        obstacles: impl IntoIterator<Item = Cell>,
    ) -> Self {
        Self {
            rows,
            cols,
            start: start.into(),
            goal: goal.into(),
            obstacles: obstacles.into_iter().collect(),
        }
    }

    /// Number of tabular states, `rows * cols`.
    pub fn state_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacles.contains(&cell)
    }

    /// Row-major flattening.
    pub fn state_index(&self, cell: Cell) -> Result<usize, GridError> {
        if !self.in_bounds(cell) {
            return Err(GridError::OutOfBounds {
                cell,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(cell.row * self.cols + cell.col)
    }

    pub fn cell_of_index(&self, index: usize) -> Result<Cell, GridError> {
        if index >= self.state_count() {
            return Err(GridError::IndexOutOfRange {
                index,
                states: self.state_count(),
            });
        }
        Ok(Cell::new(index / self.cols, index % self.cols))
    }

    /// Neighbour in the direction of `action`, or `None` if it would leave the grid.
    pub fn neighbor(&self, cell: Cell, action: Action) -> Option<Cell> {
        let (dr, dc) = action.delta();
        let row = cell.row as i64 + dr;
        let col = cell.col as i64 + dc;
        if row < 0 || col < 0 || row >= self.rows as i64 || col >= self.cols as i64 {
            None
        } else {
            Some(Cell::new(row as usize, col as usize))
        }
    }

    pub fn step(
        &self,
        state: Cell,
        action: Action,
        rewards: &RewardSchedule,
    ) -> Result<StepResult, GridError> {
        if !self.in_bounds(state) {
            return Err(GridError::OutOfBounds {
                cell: state,
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.is_obstacle(state) {
            return Err(GridError::FromObstacle(state));
        }
        if state == self.goal {
            return Err(GridError::FromGoal(state));
        }
        let result = match self.neighbor(state, action) {
            None => StepResult {
                next: state,
                reward: rewards.step_reward,
                terminal: false,
            },
            Some(next) if self.is_obstacle(next) => StepResult {
                next,
                reward: rewards.obstacle_reward,
                terminal: true,
            },
            Some(next) if next == self.goal => StepResult {
                next,
                reward: rewards.goal_reward,
                terminal: true,
            },
            Some(next) => StepResult {
                next,
                reward: rewards.step_reward,
                terminal: false,
            },
        };
        Ok(result)
    }

    /// Every broken invariant, including reachability of the goal. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.rows == 0 || self.cols == 0 {
            out.push(Violation::EmptyGrid);
            return out;
        }
        let start_ok = self.in_bounds(self.start);
        let goal_ok = self.in_bounds(self.goal);
        if !start_ok {
            out.push(Violation::StartOutOfBounds(self.start));
        }
        if !goal_ok {
            out.push(Violation::GoalOutOfBounds(self.goal));
        }
        for &o in &self.obstacles {
            if !self.in_bounds(o) {
                out.push(Violation::ObstacleOutOfBounds(o));
            }
        }
        if self.start == self.goal {
            out.push(Violation::StartEqualsGoal);
        }
        if self.is_obstacle(self.start) {
            out.push(Violation::StartOnObstacle);
        }
        if self.is_obstacle(self.goal) {
            out.push(Violation::GoalOnObstacle);
        }
        if out.is_empty() && self.bfs_parents().is_none() {
            out.push(Violation::UnreachableGoal);
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn ensure_valid(&self) -> Result<(), GridError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(GridError::Invalid(violations))
        }
    }

    /// BFS from start; returns the parent table if the goal was reached.
    fn bfs_parents(&self) -> Option<Vec<Option<(usize, Action)>>> {
        let m = self.state_count();
        let start = self.start.row * self.cols + self.start.col;
        let goal = self.goal.row * self.cols + self.goal.col;
        let mut parent: Vec<Option<(usize, Action)>> = vec![None; m];
        let mut seen = vec![false; m];
        seen[start] = true;
        let mut queue = VecDeque::from([self.start]);
        while let Some(cell) = queue.pop_front() {
            let idx = cell.row * self.cols + cell.col;
            if idx == goal {
                return Some(parent);
            }
            for action in Action::ALL {
                let Some(next) = self.neighbor(cell, action) else {
                    continue;
                };
                let nidx = next.row * self.cols + next.col;
                if seen[nidx] || self.is_obstacle(next) {
                    continue;
                }
                seen[nidx] = true;
                parent[nidx] = Some((idx, action));
                queue.push_back(next);
            }
        }
        None
    }

    /// Minimal-length obstacle-free plan from start to goal. Neighbours are
    /// expanded in ascending action code, so ties resolve deterministically.
    pub fn shortest_path_bfs(&self) -> Result<Option<PathPlan>, GridError> {
        let violations: Vec<_> = self
            .validate()
            .into_iter()
            .filter(|v| *v != Violation::UnreachableGoal)
            .collect();
        if !violations.is_empty() {
            return Err(GridError::Invalid(violations));
        }
        let Some(parent) = self.bfs_parents() else {
            return Ok(None);
        };
        let start = self.start.row * self.cols + self.start.col;
        let mut idx = self.goal.row * self.cols + self.goal.col;
        let mut actions = Vec::new();
        while idx != start {
            let (prev, action) = parent[idx].expect("bfs parent chain is complete");
            actions.push(action);
            idx = prev;
        }
        actions.reverse();
        Ok(Some(
            PathPlan::new(actions).expect("start != goal so the plan is non-empty"),
        ))
    }

    /// Replays `plan` through [`GridSpec::step`] from start. Stops early at a
    /// terminal transition and returns every visited cell, start included.
    pub fn replay(&self, plan: &PathPlan, rewards: &RewardSchedule) -> Result<Vec<Cell>, GridError> {
        let mut cells = vec![self.start];
        let mut state = self.start;
        for &action in plan.actions() {
            let step = self.step(state, action, rewards)?;
            state = step.next;
            cells.push(state);
            if step.terminal {
                break;
            }
        }
        Ok(cells)
    }

    /// Text rendering: `.` free, `#` obstacle, `S` start, `G` goal.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for row in 0..self.rows {
            for col in 0..self.cols {
                let cell = Cell::new(row, col);
                let ch = if cell == self.start {
                    'S'
                } else if cell == self.goal {
                    'G'
                } else if self.is_obstacle(cell) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

/// Random valid spec: distinct start and goal, up to `max_obstacles`
/// obstacles, goal reachable. Resamples until valid.
pub fn random_spec<R: rand::Rng + ?Sized>(
    rows: usize,
    cols: usize,
    max_obstacles: usize,
    rng: &mut R,
) -> GridSpec {
    use rand::seq::SliceRandom;
    assert!(rows * cols >= 2, "need at least two cells");
    let cells: Vec<Cell> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| Cell::new(r, c)))
        .collect();
    let max_obstacles = max_obstacles.min(cells.len() - 2);
    loop {
        let mut shuffled = cells.clone();
        shuffled.shuffle(rng);
        let count = rng.random_range(0..=max_obstacles);
        let spec = GridSpec::new(
            rows,
            cols,
            shuffled[0],
            shuffled[1],
            shuffled[2..2 + count].iter().copied(),
        );
        if spec.is_valid() {
            return spec;
        }
    }
}
