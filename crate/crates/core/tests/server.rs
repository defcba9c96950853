use std::time::{Duration, Instant};

use gridpilot::pathcodec::{decode_wire, PathPlan};
use gridpilot::pathserver::{
    fetch_path, serve, spawn_poller, ClientError, PathClient, PathRecord, PollEvent, RetryPolicy, ServerError,
};

fn quick_retry() -> RetryPolicy {
    RetryPolicy {
        base: Duration::from_millis(10),
        cap: Duration::from_millis(40),
        max_attempts: 3,
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn empty_server_answers_no_plan() {
    let server = serve("127.0.0.1:0", None).await.unwrap();
    let resp = reqwest::get(format!("{}/path", server.base_url())).await.unwrap();
    assert_eq!(resp.status(), 404);
    let body: serde_json::Value = serde_json::from_slice(&resp.bytes().await.unwrap()).unwrap();
    assert_eq!(body["error"], "no-plan");
    let err = fetch_path(&server.base_url(), quick_retry()).await.unwrap_err();
    assert_eq!(err, ClientError::NoPlan);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn initial_record_and_health() {
    let plan = PathPlan::from_codes(&[1, 2]).unwrap();
    let server = serve("127.0.0.1:0", Some(PathRecord::from_plan(&plan, 1))).await.unwrap();
    let resp = reqwest::get(format!("{}/path", server.base_url())).await.unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["x-path-version"], "1");
    assert_eq!(resp.headers()["content-type"], "application/json");
    assert_eq!(resp.text().await.unwrap(), r#"{"array":["1","2"]}"#);
    let health = reqwest::get(format!("{}/health", server.base_url())).await.unwrap();
    assert_eq!(health.text().await.unwrap(), "ok");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_bodies_are_rejected_and_store_kept() {
    let server = serve("127.0.0.1:0", None).await.unwrap();
    let http = reqwest::Client::new();
    let url = format!("{}/path", server.base_url());
    let ok = http.put(&url).body(r#"{"array":["3"]}"#).send().await.unwrap();
    assert_eq!(ok.status(), 204);
    assert_eq!(ok.headers()["x-path-version"], "1");
    for (body, reason) in [
        ("{", "malformed"),
        (r#"{"path":["1"]}"#, "schema"),
        (r#"{"array":["9"]}"#, "invalid-direction"),
        (r#"{"array":[]}"#, "empty-plan"),
    ] {
        let resp = http.put(&url).body(body).send().await.unwrap();
        assert_eq!(resp.status(), 400);
        let v: serde_json::Value = serde_json::from_slice(&resp.bytes().await.unwrap()).unwrap();
        assert_eq!(v["error"], reason, "{body}");
    }
    let post = http.post(&url).body(r#"{"array":["0","0"]}"#).send().await.unwrap();
    assert_eq!(post.status(), 204);
    assert_eq!(post.headers()["x-path-version"], "2");
    let got = fetch_path(&server.base_url(), quick_retry()).await.unwrap();
    assert_eq!(got.plan.codes(), vec![0, 0]);
    assert_eq!(got.version, Some(2));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_puts_leave_one_complete_body() {
    let server = serve("127.0.0.1:0", None).await.unwrap();
    let url = format!("{}/path", server.base_url());
    let bodies: Vec<String> = (0..100)
        .map(|i| {
            let codes: Vec<String> = (0..=(i % 7)).map(|k| format!("\"{}\"", (i + k) % 4)).collect();
            format!("{{\"array\":[{}]}}", codes.join(","))
        })
        .collect();
    let http = reqwest::Client::new();
    let tasks: Vec<_> = bodies
        .iter()
        .cloned()
        .map(|b| {
            let http = http.clone();
            let url = url.clone();
            tokio::spawn(async move { http.put(&url).body(b).send().await.unwrap().status() })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), 204);
    }
    let record = server.store().get().unwrap();
    assert_eq!(record.version, 100);
    let final_body = String::from_utf8(record.payload.clone()).unwrap();
    assert!(bodies.contains(&final_body));
    assert!(decode_wire(final_body.as_bytes()).is_ok());
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn poller_reports_exactly_one_change() {
    let plan = PathPlan::from_codes(&[2]).unwrap();
    let server = serve("127.0.0.1:0", Some(PathRecord::from_plan(&plan, 1))).await.unwrap();
    let client = PathClient::new(&server.base_url(), quick_retry()).unwrap();
    let mut poller = spawn_poller(client.clone(), Duration::from_millis(20));

    let first = tokio::time::timeout(Duration::from_secs(2), poller.events.recv()).await.unwrap();
    assert!(matches!(first, Some(PollEvent::Updated(ref vp)) if vp.version == Some(1)));

    let updated = PathPlan::from_codes(&[3, 3]).unwrap();
    assert_eq!(client.put(&updated).await.unwrap(), Some(2));
    let second = tokio::time::timeout(Duration::from_secs(2), poller.events.recv()).await.unwrap();
    match second {
        Some(PollEvent::Updated(vp)) => {
            assert_eq!(vp.plan, updated);
            assert_eq!(vp.version, Some(2));
        }
        other => panic!("unexpected {other:?}"),
    }
    // several more polls happen; none may report a change
    tokio::time::sleep(Duration::from_millis(200)).await;
    assert!(poller.events.try_recv().is_err());
    poller.stop();
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn shutdown_refuses_new_connections() {
    let server = serve("127.0.0.1:0", None).await.unwrap();
    let base = server.base_url();
    server.shutdown().await.unwrap();
    let err = fetch_path(&base, quick_retry()).await.unwrap_err();
    assert!(matches!(err, ClientError::Network { attempts: 3, .. }), "{err:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn unreachable_host_backs_off_then_fails() {
    // grab a free port and release it so nothing listens there
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let started = Instant::now();
    let err = fetch_path(&format!("http://127.0.0.1:{port}"), quick_retry()).await.unwrap_err();
    let elapsed = started.elapsed();
    assert!(matches!(err, ClientError::Network { attempts: 3, .. }), "{err:?}");
    assert!(elapsed >= Duration::from_millis(30), "{elapsed:?}");
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn occupied_port_fails_to_bind() {
    let server = serve("127.0.0.1:0", None).await.unwrap();
    let err = match serve(server.local_addr(), None).await {
        Err(e) => e,
        Ok(_) => panic!("second bind succeeded"),
    };
    assert!(matches!(err, ServerError::Bind(_)));
    server.shutdown().await.unwrap();
}
