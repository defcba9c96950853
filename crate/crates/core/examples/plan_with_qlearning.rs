//! Train tabular Q-learning on a maze and compare the learned route with BFS.
//!
//! cargo run --example plan_with_qlearning -- [maze-file] [seed]

use std::path::PathBuf;

use gridpilot::cli::load_maze;
use gridpilot::qlearning::{extract_path, train};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mazes/fig6-like.maze")));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let maze = load_maze(&path)?;
    let spec = maze.valid_spec()?;
    println!("{}", spec.render());

    let mut hp = maze.q_hyperparams();
    hp.seed = seed;
    let (q, stats) = train(&spec, &hp)?;
    let plan = extract_path(&q, &spec)?;
    let bfs = spec.shortest_path_bfs()?.expect("valid mazes are solvable");

    println!("episodes      {}", stats.episodes_run);
    println!("train time    {:.4} s", stats.wall_time);
    println!("final return  {:.1}", stats.returns.last().copied().unwrap_or_default());
    println!("converged     {}", stats.converged);
    println!("learned plan  {plan} ({} moves)", plan.len());
    println!("bfs plan      {bfs} ({} moves)", bfs.len());
    println!("start state values: {:?}", q.row(spec.state_index(spec.start)?));
    Ok(())
}
