//! End to end: plan with BFS, publish to a live path service, fetch it back,
//! decode it and drive it in the simulator.
//!
//! cargo run --example closed_loop

use gridpilot::pathcodec::decode_moves;
use gridpilot::pathserver::{fetch_path, serve, PathClient, RetryPolicy};
use gridpilot::robotsim::{execute_plan, PidGains, RobotParams};
use gridpilot::{Action, GridSpec};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec::new(3, 3, (0, 0), (2, 2), [(1, 1).into()]);
    spec.ensure_valid()?;
    let plan = spec.shortest_path_bfs()?.expect("solvable");
    println!("{}", spec.render());
    println!("planned   {plan}");

    let server = serve("127.0.0.1:0", None).await?;
    let client = PathClient::new(&server.base_url(), RetryPolicy::default())?;
    let version = client.put(&plan).await?;
    println!("published version {version:?} to {}", server.base_url());

    let fetched = fetch_path(&server.base_url(), RetryPolicy::default()).await?;
    println!("fetched   {}", fetched.plan);
    let moves: Vec<String> = decode_moves(&fetched.plan, Action::Up).iter().map(|m| m.to_string()).collect();
    println!("moves     {}", moves.join(" "));

    let params = RobotParams {
        speed_noise_std: 0.0,
        ..RobotParams::default()
    };
    let run = tokio::task::spawn_blocking(move || {
        execute_plan(&spec, &fetched.plan, Action::Up, &params, &PidGains::default(), 0)
    })
    .await??;
    println!("final cell {:?}, success {}", run.final_cell, run.success);
    println!("heading error {:.4} rad", run.heading_error());
    server.shutdown().await?;
    Ok(())
}
