use std::net::SocketAddr;
use std::time::Duration;

use openpda_core::clock::FixedClock;
use openpda_core::fixtures;
use openpda_core::service::{self, ServiceConfig, Stack, StackConfig};
use openpda_core::sim::SimConfig;
use serde_json::{json, Value};
use tokio::time::timeout;

fn any_port() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

async fn call(method: reqwest::Method, url: &str, body: Option<&str>) -> (u16, String) {
    let mut req = reqwest::Client::new().request(method, url);
    if let Some(body) = body {
        req = req.header("content-type", "application/json").body(body.to_string());
    }
    let r = req.send().await.unwrap();
    (r.status().as_u16(), r.text().await.unwrap())
}

async fn chat(base: &str, session: &str, text: &str) -> Value {
    let body = json!({"session_id": session, "text": text}).to_string();
    let (code, text) = call(reqwest::Method::POST, &format!("{base}/api/chat"), Some(&body)).await;
    assert_eq!(code, 200, "{text}");
    serde_json::from_str(&text).unwrap()
}

async fn stack(dir: &std::path::Path) -> Stack {
    let config = StackConfig {
        sim: SimConfig { publish_interval: Duration::from_millis(200), ..SimConfig::default() },
        clock: std::sync::Arc::new(FixedClock::parse("2026-03-04T10:00:00Z").unwrap()),
        ..StackConfig::new(dir)
    };
    let stack = Stack::start(config).await.unwrap();
    assert!(stack.ready(Duration::from_secs(5)).await);
    stack
}

#[tokio::test]
async fn chat_through_the_whole_stack() {
    let dir = tempfile::tempdir().unwrap();
    let stack = stack(dir.path()).await;
    let base = stack.service.url();
    let mut relays = stack.sim.watch();

    let r = chat(&base, "s1", "Home, turn on the lights").await;
    assert_eq!(r["reply_kind"], "result");
    assert_eq!(r["dispatched_command"], json!({"AppName":"Home","Intent":"Turn on","object":"the lights"}));
    timeout(Duration::from_secs(1), relays.wait_for(|s| s.relay("light"))).await.unwrap().unwrap();

    let r = chat(&base, "s2", "Home, turn off").await;
    assert_eq!((r["reply_kind"].as_str(), r["reply_text"].as_str()), (Some("question"), Some("What should I turn off?")));
    assert!(r.get("dispatched_command").is_none());
    let r = chat(&base, "s2", "the computer").await;
    assert_eq!(r["dispatched_command"], json!({"AppName":"Home","Intent":"Turn off","object":"the computer"}));

    let r = chat(&base, "s3", "Calendar, remind 16th of November to meet Sasha").await;
    assert_eq!(r["reply_kind"], "result");
    assert!(r["reply_text"].as_str().unwrap().contains("meet Sasha"));

    let r = chat(&base, "s4", "Home, flibber jabber").await;
    assert_eq!(r["reply_kind"], "unrecognized");

    for bad in [r#"{"session_id":"s","text":""}"#, r#"{"text":"hi"}"#, "garbage", r#"{"session_id":"","text":"hi"}"#] {
        let (code, _) = call(reqwest::Method::POST, &format!("{base}/api/chat"), Some(bad)).await;
        assert_eq!(code, 400, "{bad}");
    }

    // Console reads: proxied state and actuators, health.
    let (code, text) = call(reqwest::Method::GET, &format!("{base}/api/home/state"), None).await;
    assert_eq!(code, 200);
    let state: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(state["readings"].as_array().unwrap().len(), 3);

    let (code, _) =
        call(reqwest::Method::POST, &format!("{base}/api/home/actuators/light"), Some(r#"{"on":false}"#)).await;
    assert_eq!(code, 200);
    timeout(Duration::from_secs(1), relays.wait_for(|s| !s.relay("light"))).await.unwrap().unwrap();
    let (code, _) =
        call(reqwest::Method::POST, &format!("{base}/api/home/actuators/toaster"), Some(r#"{"on":true}"#)).await;
    assert_eq!(code, 404);

    let (code, text) = call(reqwest::Method::GET, &format!("{base}/api/healthz"), None).await;
    assert_eq!(code, 200, "{text}");
    let health: Value = serde_json::from_str(&text).unwrap();
    assert_eq!((health["agent"].as_str(), health["broker"].as_str()), (Some("ok"), Some("ok")));

    assert!(stack.stopped().is_empty());
    stack.shutdown().await;
}

#[tokio::test]
async fn event_stream_carries_readings_and_commands() {
    let dir = tempfile::tempdir().unwrap();
    let stack = stack(dir.path()).await;
    let base = stack.service.url();
    let mut response = reqwest::get(format!("{base}/api/events")).await.unwrap();
    assert_eq!(response.status().as_u16(), 200);

    chat(&base, "s", "Home, turn on the lights").await;
    let mut seen = String::new();
    timeout(Duration::from_secs(3), async {
        while !(seen.contains("event: reading") && seen.contains("event: actuator") && seen.contains("event: chat")) {
            let chunk = response.chunk().await.unwrap().expect("stream open");
            seen.push_str(&String::from_utf8_lossy(&chunk));
        }
    })
    .await
    .unwrap_or_else(|_| panic!("events seen so far: {seen}"));
}

#[tokio::test]
async fn app_registration_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let handle = service::serve(ServiceConfig {
        listen: any_port(),
        apps_dir: Some(dir.path().join("apps")),
        ..ServiceConfig::default()
    })
    .await
    .unwrap();
    let base = handle.url();
    let apps = format!("{base}/api/apps");

    let r = chat(&base, "s", "Home, turn off").await;
    assert_eq!(r["reply_kind"], "unrecognized");

    let (code, _) = call(reqwest::Method::POST, &apps, Some(fixtures::HOME_DESCRIPTOR)).await;
    assert_eq!(code, 201);
    let (code, _) = call(reqwest::Method::POST, &apps, Some(fixtures::HOME_DESCRIPTOR)).await;
    assert_eq!(code, 409);

    let mut missing_url: Value = serde_json::from_str(fixtures::CALENDAR_DESCRIPTOR).unwrap();
    missing_url.as_object_mut().unwrap().remove("url");
    let (code, text) = call(reqwest::Method::POST, &apps, Some(&missing_url.to_string())).await;
    assert_eq!(code, 422);
    assert!(text.contains("url"), "{text}");
    let (code, _) = call(reqwest::Method::POST, &apps, Some("{not json")).await;
    assert_eq!(code, 422);

    let (code, text) = call(reqwest::Method::GET, &apps, None).await;
    assert_eq!(code, 200);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap().as_array().unwrap().len(), 1);
    assert!(dir.path().join("apps/Home.json").exists());

    let r = chat(&base, "s", "Home, turn off").await;
    assert_eq!(r["reply_text"], "What should I turn off?");

    let (code, _) = call(reqwest::Method::DELETE, &format!("{apps}/home"), None).await;
    assert_eq!(code, 204);
    let (code, _) = call(reqwest::Method::DELETE, &format!("{apps}/home"), None).await;
    assert_eq!(code, 404);

    // No agent configured, then one that is down: both are gateway errors.
    let (code, _) = call(reqwest::Method::GET, &format!("{base}/api/home/state"), None).await;
    assert_eq!(code, 502);
    let closed = std::net::TcpListener::bind(any_port()).unwrap().local_addr().unwrap();
    let down = service::serve(ServiceConfig {
        listen: any_port(),
        agent_url: Some(format!("http://{closed}")),
        ..ServiceConfig::default()
    })
    .await
    .unwrap();
    let (code, _) = call(reqwest::Method::GET, &format!("{}/api/home/state", down.url()), None).await;
    assert_eq!(code, 502);
    let (code, _) = call(reqwest::Method::GET, &format!("{}/api/healthz", down.url()), None).await;
    assert_eq!(code, 503);
}

#[tokio::test]
async fn negative_threshold_is_a_config_error() {
    let config = ServiceConfig {
        listen: any_port(),
        engine: openpda_core::dialog::EngineConfig { threshold: -1.0, ..Default::default() },
        ..ServiceConfig::default()
    };
    assert!(service::serve(config).await.is_err());
}
