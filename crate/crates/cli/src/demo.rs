use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use openpda_core::dispatch::encode;
use openpda_core::service::scenarios::{self, Expect};
use openpda_core::service::{Stack, StackConfig};

/// Replays every scenario against a fresh in-process stack.
pub async fn run() -> Result<ExitCode> {
    let dir = tempfile::tempdir()?;
    let stack = Stack::start(StackConfig::new(dir.path())).await?;
    if !stack.ready(Duration::from_secs(10)).await {
        anyhow::bail!("stack did not come up");
    }
    let engine = stack.service.state.engine.clone();
    let mut relays = stack.sim.watch();

    let all = scenarios::all();
    let mut passed = 0;
    for scenario in &all {
        let session = format!("demo-{}", scenario.id);
        let mut failure = None;
        for turn in &scenario.turns {
            let reply = engine.handle_message(&session, turn.text).await?;
            match &turn.expect {
                Expect::Question(q) if reply.text != *q => {
                    failure = Some(format!("{:?}: expected question {q:?}, got {:?}", turn.text, reply.text));
                }
                Expect::Question(_) => {}
                Expect::Dispatch { command, light } => {
                    let sent = reply.dispatched.as_ref().map(|c| serde_json::from_slice::<serde_json::Value>(&encode(c)));
                    match sent {
                        Some(Ok(sent)) if sent == *command => {}
                        other => failure = Some(format!("{:?}: expected {command}, got {other:?}", turn.text)),
                    }
                    if let (None, Some(on)) = (&failure, light) {
                        let reached = tokio::time::timeout(Duration::from_secs(1), relays.wait_for(|s| s.relay("light") == *on)).await;
                        if !matches!(reached, Ok(Ok(_))) {
                            failure = Some(format!("light relay did not turn {}", if *on { "on" } else { "off" }));
                        }
                    }
                }
            }
            if failure.is_some() {
                break;
            }
        }
        match failure {
            None => {
                passed += 1;
                println!("PASS {}", scenario.id);
            }
            Some(why) => println!("FAIL {}: {why}", scenario.id),
        }
    }
    println!("{passed}/{} passed", all.len());
    stack.shutdown().await;
    Ok(if passed == all.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
