//! Train the deep Q-network on a small maze and save a checkpoint.
//!
//! cargo run --release --example plan_with_dqn -- [maze-file] [seed]

use std::path::PathBuf;

use gridpilot::cli::load_maze;
use gridpilot::dqn::{extract_path, q_values, train, Mlp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mazes/zigzag.maze")));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let maze = load_maze(&path)?;
    let spec = maze.valid_spec()?;
    println!("{}", spec.render());

    let mut hp = maze.dqn_hyperparams();
    hp.seed = seed;
    let (net, stats) = train(&spec, &hp)?;
    println!("layers        {:?}", net.layer_sizes());
    println!("train time    {:.3} s over {} episodes", stats.wall_time, stats.episodes_run);
    println!("converged     {}", stats.converged);

    let start = spec.state_index(spec.start)?;
    println!("Q(start)      {:?}", q_values(&net, start)?);
    match extract_path(&net, &spec) {
        Ok(plan) => println!("learned plan  {plan} ({} moves)", plan.len()),
        Err(e) => println!("no plan: {e}"),
    }
    let bfs = spec.shortest_path_bfs()?.expect("valid mazes are solvable");
    println!("bfs plan      {bfs} ({} moves)", bfs.len());

    let ckpt = std::env::temp_dir().join("gridpilot-dqn.bin");
    net.save(&ckpt)?;
    let restored = Mlp::load(&ckpt)?;
    assert_eq!(restored, net);
    println!("checkpoint    {}", ckpt.display());
    Ok(())
}
