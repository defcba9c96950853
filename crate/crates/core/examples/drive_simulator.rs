//! Drive a BFS route through the robot simulator and export the trajectory.
//!
//! cargo run --example drive_simulator -- [maze-file] [noise-std] [pivot]

use std::path::PathBuf;

use gridpilot::cli::load_maze;
use gridpilot::robotsim::{execute_plan, PidGains, RobotParams, TurnMode};
use gridpilot::Action;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mazes/fig6-like.maze")));
    let noise: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.02);
    let turn_mode = match args.next().as_deref() {
        Some("pivot") => TurnMode::Pivot,
        _ => TurnMode::InPlace,
    };

    let spec = load_maze(&path)?.valid_spec()?;
    let plan = spec.shortest_path_bfs()?.expect("valid mazes are solvable");
    let params = RobotParams {
        speed_noise_std: noise,
        turn_mode,
        ..RobotParams::default()
    };
    let run = execute_plan(&spec, &plan, Action::Up, &params, &PidGains::default(), 1)?;

    println!("plan            {plan}");
    println!("primitives      {}", run.primitives_executed);
    println!("final pose      x={:.4} y={:.4} theta={:.4}", run.final_pose.x, run.final_pose.y, run.final_pose.theta);
    println!("final cell      {:?} (goal {})", run.final_cell, spec.goal);
    println!("position error  {:.4} m", run.position_error(spec.goal, params.cell_length));
    println!("heading error   {:.4} rad", run.heading_error());
    println!("success         {}", run.success);

    let out = std::env::temp_dir().join("gridpilot-trajectory.csv");
    run.write_trajectory_csv(std::fs::File::create(&out)?)?;
    println!("trajectory      {} ({} samples)", out.display(), run.trajectory.len());
    println!("{}", serde_json::to_string_pretty(&run.summary())?);
    Ok(())
}
