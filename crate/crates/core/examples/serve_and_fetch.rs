//! Start the path service, publish plans and watch a poller pick up changes.
//!
//! cargo run --example serve_and_fetch

use std::time::Duration;

use gridpilot::pathserver::{serve, spawn_poller, PathClient, PollEvent, RetryPolicy};
use gridpilot::PathPlan;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = serve("127.0.0.1:0", None).await?;
    println!("serving on {}", server.base_url());

    let client = PathClient::new(&server.base_url(), RetryPolicy::default())?;
    match client.fetch().await {
        Err(e) => println!("before publishing: {e}"),
        Ok(p) => println!("unexpected plan {}", p.plan),
    }

    let mut poller = spawn_poller(client.clone(), Duration::from_millis(100));
    for codes in [vec![1, 1, 2], vec![2, 2, 3, 3]] {
        let plan = PathPlan::from_codes(&codes)?;
        let version = client.put(&plan).await?;
        println!("published {plan} as version {version:?}");
        match tokio::time::timeout(Duration::from_secs(2), poller.events.recv()).await? {
            Some(PollEvent::Updated(vp)) => println!("poller saw {} (version {:?})", vp.plan, vp.version),
            Some(PollEvent::Failed(e)) => println!("poll failed: {e}"),
            None => break,
        }
    }
    poller.stop();
    server.shutdown().await?;
    println!("server stopped");
    Ok(())
}
