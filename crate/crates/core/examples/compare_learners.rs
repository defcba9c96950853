//! Time Q-learning against the DQN on generated mazes and summarise by
//! obstacle count.
//!
//! cargo run --release --example compare_learners -- [maze-count] [seeds]

use gridpilot::cli::{cmd_compare, CompareOptions, MazeSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(6);
    let seeds: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);

    let opts = CompareOptions {
        source: MazeSource::Generate {
            count,
            rows: 4,
            cols: 4,
            max_obstacles: 4,
            seed: 11,
        },
        seeds: (0..seeds).collect(),
        episodes: None,
    };
    let report = cmd_compare(&opts)?;
    report.write_csv(std::io::stdout())?;
    println!();
    print!("{report}");
    Ok(())
}
