use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::PathBuf;

use super::maze::{load_maze, MazeConfig};
use super::CliError;
use crate::gridworld::random_spec;
use crate::{dqn, qlearning, seeded_rng};

pub const COMPARE_HEADER: [&str; 8] = [
    "Test sample number",
    "Obstacle count",
    "Seed",
    "Time Taken QL (in seconds)",
    "Time Taken DQL (in seconds)",
    "QL path length",
    "DQL path length",
    "BFS path length",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MazeSource {
    /// A single maze file or a directory of `*.maze` / `*.toml` files.
    Path(PathBuf),
    /// Random valid mazes.
    Generate {
        count: usize,
        rows: usize,
        cols: usize,
        max_obstacles: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub source: MazeSource,
    pub seeds: Vec<u64>,
    /// Overrides both learners' episode budgets.
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub sample: usize,
    pub maze: String,
    pub obstacles: usize,
    pub seed: u64,
    pub ql_seconds: f64,
    pub dql_seconds: f64,
    /// `None` when the learner produced no valid path.
    pub ql_length: Option<usize>,
    pub dql_length: Option<usize>,
    pub bfs_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSummary {
    pub obstacles: usize,
    pub runs: usize,
    pub mean_ql_seconds: f64,
    pub mean_dql_seconds: f64,
    pub ql_optimal: usize,
    pub dql_optimal: usize,
}

impl BucketSummary {
    pub fn faster(&self) -> &'static str {
        if self.mean_ql_seconds <= self.mean_dql_seconds {
            "QL"
        } else {
            "DQL"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

fn length_cell(len: Option<usize>) -> String {
    len.map_or_else(|| "failed".to_string(), |l| l.to_string())
}

impl CompareReport {
    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(COMPARE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.sample.to_string(),
                r.obstacles.to_string(),
                r.seed.to_string(),
                format!("{:.6}", r.ql_seconds),
                format!("{:.6}", r.dql_seconds),
                length_cell(r.ql_length),
                length_cell(r.dql_length),
                r.bfs_length.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One entry per distinct obstacle count, ascending.
    pub fn summary(&self) -> Vec<BucketSummary> {
        let mut buckets: BTreeMap<usize, Vec<&CompareRow>> = BTreeMap::new();
        for r in &self.rows {
            buckets.entry(r.obstacles).or_default().push(r);
        }
        buckets
            .into_iter()
            .map(|(obstacles, rows)| {
                let n = rows.len() as f64;
                BucketSummary {
                    obstacles,
                    runs: rows.len(),
                    mean_ql_seconds: rows.iter().map(|r| r.ql_seconds).sum::<f64>() / n,
                    mean_dql_seconds: rows.iter().map(|r| r.dql_seconds).sum::<f64>() / n,
                    ql_optimal: rows.iter().filter(|r| r.ql_length == Some(r.bfs_length)).count(),
                    dql_optimal: rows.iter().filter(|r| r.dql_length == Some(r.bfs_length)).count(),
                }
            })
            .collect()
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "obstacles  runs  QL mean s  DQL mean s  QL optimal  DQL optimal  faster")?;
        for b in self.summary() {
            writeln!(
                f,
                "{:>9}  {:>4}  {:>9.4}  {:>10.4}  {:>10}  {:>11}  {}",
                b.obstacles,
                b.runs,
                b.mean_ql_seconds,
                b.mean_dql_seconds,
                format!("{}/{}", b.ql_optimal, b.runs),
                format!("{}/{}", b.dql_optimal, b.runs),
                b.faster()
            )?;
        }
        Ok(())
    }
}

/// Loads or generates the maze set, named for reporting.
pub fn collect_mazes(source: &MazeSource) -> Result<Vec<(String, MazeConfig)>, CliError> {
    match source {
        MazeSource::Path(path) if path.is_dir() => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("maze" | "toml")))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::Input(format!("no .maze or .toml files in {}", path.display())));
            }
            files
                .into_iter()
                .map(|p| {
                    let name = p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
                    load_maze(&p).map(|m| (name, m)).map_err(CliError::from)
                })
                .collect()
        }
        MazeSource::Path(path) => {
            let name = path.display().to_string();
            Ok(vec![(name, load_maze(path)?)])
        }
        MazeSource::Generate {
            count,
            rows,
            cols,
            max_obstacles,
            seed,
        } => {
            if *count == 0 {
                return Err(CliError::Input("maze count must be positive".into()));
            }
            let mut rng = seeded_rng(*seed);
            Ok((0..*count)
                .map(|i| {
                    let spec = random_spec(*rows, *cols, *max_obstacles, &mut rng);
                    (format!("generated-{i}"), MazeConfig::from_spec(&spec))
                })
                .collect())
        }
    }
}

/// Trains both learners on every maze for every seed. Learner failures are
/// recorded in the row; only unusable input aborts.
pub fn cmd_compare(opts: &CompareOptions) -> Result<CompareReport, CliError> {
    if opts.seeds.is_empty() {
        return Err(CliError::Input("at least one seed is required".into()));
    }
    let mazes = collect_mazes(&opts.source)?;
    let mut report = CompareReport::default();
    for (name, maze) in &mazes {
        let spec = maze.valid_spec().map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let bfs_length = spec
            .shortest_path_bfs()
            .map_err(|e| CliError::Input(e.to_string()))?
            .map_or(0, |p| p.len());
        for &seed in &opts.seeds {
            let mut q_hp = maze.q_hyperparams();
            q_hp.seed = seed;
            let mut d_hp = maze.dqn_hyperparams();
            d_hp.seed = seed;
            if let Some(e) = opts.episodes {
                q_hp.episodes = e;
                d_hp.episodes = e;
            }

            let (ql_seconds, ql_length) = match qlearning::train(&spec, &q_hp) {
                Ok((q, stats)) => (
                    stats.wall_time,
                    qlearning::extract_path(&q, &spec).ok().map(|p| p.len()),
                ),
                Err(_) => (0.0, None),
            };
            let (dql_seconds, dql_length) = match dqn::train(&spec, &d_hp) {
                Ok((net, stats)) => (stats.wall_time, dqn::extract_path(&net, &spec).ok().map(|p| p.len())),
                Err(dqn::DqnError::DivergedDuringTraining(stats)) => (stats.wall_time, None),
                Err(_) => (0.0, None),
            };
            report.rows.push(CompareRow {
                sample: report.rows.len() + 1,
                maze: name.clone(),
                obstacles: spec.obstacles.len(),
                seed,
                ql_seconds,
                dql_seconds,
                ql_length,
                dql_length,
                bfs_length,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(obstacles: usize, ql: f64, dql: f64) -> CompareRow {
        CompareRow {
            sample: 1,
            maze: "m".into(),
            obstacles,
            seed: 0,
            ql_seconds: ql,
            dql_seconds: dql,
            ql_length: Some(4),
            dql_length: None,
            bfs_length: 4,
        }
    }

    #[test]
    fn csv_header_and_failed_marker() {
        let report = CompareReport {
            rows: vec![row(2, 0.5, 1.5)],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "Test sample number,Obstacle count,Seed,Time Taken QL (in seconds),\
             Time Taken DQL (in seconds),QL path length,DQL path length,BFS path length"
        );
        assert_eq!(lines.next().unwrap(), "1,2,0,0.500000,1.500000,4,failed,4");
    }

    #[test]
    fn buckets_by_obstacle_count() {
        let report = CompareReport {
            rows: vec![row(1, 1.0, 2.0), row(3, 4.0, 2.0), row(1, 3.0, 2.0)],
        };
        let s = report.summary();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].obstacles, s[0].runs), (1, 2));
        assert_eq!(s[0].mean_ql_seconds, 2.0);
        assert_eq!(s[0].faster(), "QL");
        assert_eq!(s[1].faster(), "DQL");
        assert_eq!(s[0].ql_optimal, 2);
        assert_eq!(s[0].dql_optimal, 0);
        assert!(report.to_string().contains("faster"));
    }

    #[test]
    fn generated_mazes_are_valid_and_deterministic() {
        let source = MazeSource::Generate {
            count: 4,
            rows: 4,
            cols: 4,
            max_obstacles: 3,
            seed: 5,
        };
        let a = collect_mazes(&source).unwrap();
        let b = collect_mazes(&source).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|(_, m)| m.spec().is_valid()));
    }
}
