use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dqn::DqnHyperparams;
use crate::gridworld::{Cell, GridSpec, RewardSchedule, Violation};
use crate::qlearning::QHyperparams;

#[derive(Debug, Error)]
pub enum MazeError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("maze has no {0}")]
    Missing(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("invalid maze: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Everything needed to train on and drive through one maze.
///
/// Top-level `rewards` and `seed` override the copies inside the learner
/// sections, so both learners always see the same environment.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeConfig {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub goal: Cell,
    pub obstacles: Vec<Cell>,
    pub rewards: RewardSchedule,
    pub qlearning: QHyperparams,
    pub dqn: DqnHyperparams,
    pub seed: u64,
}

impl MazeConfig {
    /// The grid, without validating it.
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.rows, self.cols, self.start, self.goal, self.obstacles.iter().copied())
    }

    pub fn valid_spec(&self) -> Result<GridSpec, MazeError> {
        let spec = self.spec();
        let violations = spec.validate();
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(MazeError::Invalid(violations))
        }
    }

    pub fn q_hyperparams(&self) -> QHyperparams {
        QHyperparams {
            rewards: self.rewards,
            seed: self.seed,
            ..self.qlearning.clone()
        }
    }

    pub fn dqn_hyperparams(&self) -> DqnHyperparams {
        DqnHyperparams {
            rewards: self.rewards,
            seed: self.seed,
            ..self.dqn.clone()
        }
    }

    pub fn from_spec(spec: &GridSpec) -> Self {
        Self {
            rows: spec.rows,
            cols: spec.cols,
            start: spec.start,
            goal: spec.goal,
            obstacles: spec.obstacles.iter().copied().collect(),
            rewards: RewardSchedule::default(),
            qlearning: QHyperparams::default(),
            dqn: DqnHyperparams::default(),
            seed: 0,
        }
    }
}

const COMMENT: char = ';';

fn is_grid_line(line: &str) -> bool {
    !line.is_empty() && line.chars().all(|c| matches!(c, '.' | '#' | 'S' | 'G'))
}

/// Accepts either the `.#SG` text grid or a TOML config. Lines starting
/// with `;` are comments in the text grid.
pub fn parse_maze(text: &str) -> Result<MazeConfig, MazeError> {
    let looks_like_grid = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty() && !l.starts_with(COMMENT))
        .all(is_grid_line);
    if looks_like_grid {
        parse_text_maze(text)
    } else {
        parse_config(text)
    }
}

pub fn parse_text_maze(text: &str) -> Result<MazeConfig, MazeError> {
    let mut start = None;
    let mut goal = None;
    let mut obstacles = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with(COMMENT) {
            continue;
        }
        let row = rows;
        let width = line.chars().count();
        for (col, ch) in line.chars().enumerate() {
            let at = |message: String| MazeError::Parse {
                line: line_no + 1,
                column: col + 1,
                message,
            };
            let cell = Cell::new(row, col);
            match ch {
                '.' => {}
                '#' => obstacles.push(cell),
                'S' if start.is_some() => return Err(at("second start cell `S`".into())),
                'S' => start = Some(cell),
                'G' if goal.is_some() => return Err(at("second goal cell `G`".into())),
                'G' => goal = Some(cell),
                other => return Err(at(format!("unexpected character `{other}`"))),
            }
        }
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(MazeError::Parse {
                    line: line_no + 1,
                    column: width.min(c) + 1,
                    message: format!("row has {width} cells, expected {c}"),
                })
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or(MazeError::Missing("rows"))?;
    Ok(MazeConfig {
        rows,
        cols,
        start: start.ok_or(MazeError::Missing("start cell `S`"))?,
        goal: goal.ok_or(MazeError::Missing("goal cell `G`"))?,
        obstacles,
        rewards: RewardSchedule::default(),
        qlearning: QHyperparams::default(),
        dqn: DqnHyperparams::default(),
        seed: 0,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    rows: usize,
    cols: usize,
    start: [usize; 2],
    goal: [usize; 2],
    #[serde(default)]
    obstacles: Vec<[usize; 2]>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    rewards: RewardSchedule,
    #[serde(default)]
    qlearning: QHyperparams,
    #[serde(default)]
    dqn: DqnHyperparams,
}

/// TOML with `rows`, `cols`, `start = [r, c]`, `goal = [r, c]`,
/// `obstacles = [[r, c], ...]`, optional `seed` and optional `[rewards]`,
/// `[qlearning]`, `[dqn]` tables.
pub fn parse_config(text: &str) -> Result<MazeConfig, MazeError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => {
            let (line, column) = line_col(text, span.start);
            MazeError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        }
        None => MazeError::Config(e.message().to_string()),
    })?;
    let cell = |[r, c]: [usize; 2]| Cell::new(r, c);
    Ok(MazeConfig {
        rows: raw.rows,
        cols: raw.cols,
        start: cell(raw.start),
        goal: cell(raw.goal),
        obstacles: raw.obstacles.into_iter().map(cell).collect(),
        rewards: raw.rewards,
        qlearning: raw.qlearning,
        dqn: raw.dqn,
        seed: raw.seed,
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

pub fn load_maze(path: &Path) -> Result<MazeConfig, MazeError> {
    let text = std::fs::read_to_string(path).map_err(|source| MazeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_maze(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_row_text_grid() {
        let m = parse_maze("S.G").unwrap();
        assert_eq!((m.rows, m.cols), (1, 3));
        assert_eq!(m.start, Cell::new(0, 0));
        assert_eq!(m.goal, Cell::new(0, 2));
        assert!(m.valid_spec().is_ok());
    }

    #[test]
    fn blocked_corridor_parses_but_is_invalid() {
        let m = parse_maze("S#G\n").unwrap();
        assert!(!m.spec().is_valid());
        let err = m.valid_spec().unwrap_err();
        assert!(err.to_string().contains("unreachable-goal"));
    }

    #[test]
    fn second_start_reports_its_position() {
        match parse_maze("S..\n.S.\n..G").unwrap_err() {
            MazeError::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn second_goal_and_ragged_rows() {
        assert!(matches!(parse_maze("SGG"), Err(MazeError::Parse { line: 1, column: 3, .. })));
        assert!(matches!(parse_maze("S..\n.G"), Err(MazeError::Parse { line: 2, .. })));
        assert!(matches!(parse_maze("...\n..G"), Err(MazeError::Missing(_))));
    }

    #[test]
    fn comments_are_skipped_and_round_trip_with_render() {
        let text = "; approximate layout\nS#.\n..G\n";
        let m = parse_maze(text).unwrap();
        assert_eq!(m.spec().render(), "S#.\n..G\n");
        assert_eq!(parse_maze(&m.spec().render()).unwrap(), m);
    }

    #[test]
    fn toml_config() {
        let text = r#"
rows = 3
cols = 4
start = [0, 3]
goal = [2, 0]
obstacles = [[1, 1], [1, 2]]
seed = 9

[rewards]
goal_reward = 50.0

[qlearning]
episodes = 321

[dqn]
episodes = 12
hidden = 16
"#;
        let m = parse_maze(text).unwrap();
        assert_eq!((m.rows, m.cols), (3, 4));
        assert_eq!(m.start, Cell::new(0, 3));
        assert_eq!(m.obstacles.len(), 2);
        let q = m.q_hyperparams();
        assert_eq!(q.episodes, 321);
        assert_eq!(q.seed, 9);
        assert_eq!(q.rewards.goal_reward, 50.0);
        assert_eq!(q.rewards.step_reward, -1.0);
        let d = m.dqn_hyperparams();
        assert_eq!((d.episodes, d.hidden, d.seed), (12, 16, 9));
    }

    #[test]
    fn toml_errors_carry_location() {
        let err = parse_maze("rows = 3\ncols = \"x\"\nstart=[0,0]\ngoal=[1,1]\n").unwrap_err();
        assert!(matches!(err, MazeError::Parse { line: 2, .. }), "{err:?}");
        assert!(parse_maze("rows = 3\ncols = 3\nstart=[0,0]\ngoal=[1,1]\ncolour=1\n").is_err());
    }
}
